#include "delaysim/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace delaysim {

DexpQuantileTable::DexpQuantileTable(const DexpParamsd& params) : params_(params)
{
    if (!is_distribution_valid(params_))
        throw std::domain_error("DexpQuantileTable: requires mu*tau <= 1/e");
    if (params_.tau == 0.0)
        return;
    values_ = dexp_breakpoint_values(params_, kUniformMin, kMaxBreakpoints);
    if (values_.back() >= kUniformMin)
        tail_rate_ = characteristic_roots(params_).lambda0;
}

double DexpQuantileTable::survival(double t) const
{
    if (t < 0.0)
        return 0.0;
    if (params_.tau == 0.0)
        return std::exp(-params_.mu * t);
    const double tau = params_.tau;
    const auto n = static_cast<std::size_t>(std::floor(t / tau));
    if (n + 1 >= values_.size()) {
        const std::size_t last = values_.size() - 1;
        if (tail_rate_ == 0.0)
            return dexp_eval(t, params_);
        return values_[last] * std::exp(tail_rate_ * (t - static_cast<double>(last) * tau));
    }
    const double h = std::clamp(t - static_cast<double>(n) * tau, 0.0, tau);
    return dexp_from_breakpoints(std::span<const double>(values_), n, h, params_.mu);
}

double DexpQuantileTable::quantile(double u) const
{
    u = std::clamp(u, kUniformMin, kUniformMax);
    const double mu = params_.mu;
    const double tau = params_.tau;
    if (tau == 0.0)
        return -std::log(u) / mu;
    // Linear segment on [tau, 2 tau].
    if (u >= 1.0 - params_.product())
        return tau + (1.0 - u) / mu;

    // First breakpoint index j >= 2 with value <= u; the root lies in
    // ((j-1) tau, j tau].
    const auto first = values_.begin() + 2;
    const auto it = std::partition_point(first, values_.end(), [u](double v) { return v > u; });
    if (it == values_.end()) {
        const std::size_t last = values_.size() - 1;
        return static_cast<double>(last) * tau + std::log(u / values_[last]) / tail_rate_;
    }
    const auto j = static_cast<std::size_t>(it - values_.begin());
    if (*it == u)
        return static_cast<double>(j) * tau;
    return bracketed_root(j, u);
}

double DexpQuantileTable::bracketed_root(std::size_t upper_index, double u) const
{
    const double mu = params_.mu;
    const double tau = params_.tau;
    const std::size_t n = upper_index - 1;
    const double base = static_cast<double>(n) * tau;
    const std::span<const double> bp(values_);

    // Work in the offset h = t - n tau within [0, tau].
    double lo = 0.0;
    double hi = tau;
    const double v_lo = values_[n];
    const double v_hi = values_[upper_index];
    double h = tau * (v_lo - u) / (v_lo - v_hi);

    for (int iter = 0; iter < 100; ++iter) {
        const double f = dexp_from_breakpoints(bp, n, h, mu) - u;
        if (std::abs(f) <= 1e-15 * u)
            break;
        if (f > 0.0)
            lo = h;
        else
            hi = h;
        const double slope = -mu * dexp_from_breakpoints(bp, n - 1, h, mu);
        double next = slope != 0.0 ? h - f / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        if (std::abs(next - h) <= 2.0 * std::numeric_limits<double>::epsilon() * (base + tau)) {
            h = next;
            break;
        }
        h = next;
    }
    return base + h;
}

double sample_dexp(RngStream& rng, const DexpQuantileTable& table)
{
    return table.quantile(rng.uniform_open());
}

double markov_holding_from_uniform(double u, double total_rate)
{
    if (!(total_rate >= 0.0))
        throw std::invalid_argument("markov holding time: negative rate");
    if (total_rate == 0.0)
        return std::numeric_limits<double>::infinity();
    return -std::log(u) / total_rate;
}

double sample_markov_holding(RngStream& rng, double total_rate)
{
    if (!(total_rate >= 0.0))
        throw std::invalid_argument("markov holding time: negative rate");
    if (total_rate == 0.0)
        return std::numeric_limits<double>::infinity();
    return markov_holding_from_uniform(rng.uniform_open(), total_rate);
}

} // namespace delaysim
