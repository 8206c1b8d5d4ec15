#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "delaysim/lambert_w.hpp"

namespace delaysim {

/// Scale `mu` (1/time) and delay `tau` (time) of a delay exponential
/// distribution. Construction enforces mu > 0 and tau >= 0.
template <typename Scalar>
struct DexpParams {
    Scalar mu{1};
    Scalar tau{0};

    DexpParams() = default;
    DexpParams(Scalar mu_, Scalar tau_) : mu(mu_), tau(tau_)
    {
        if (!(mu > Scalar(0)) || !std::isfinite(mu))
            throw std::domain_error("dexp: mu must be positive and finite");
        if (!(tau >= Scalar(0)) || !std::isfinite(tau))
            throw std::domain_error("dexp: tau must be non-negative and finite");
    }

    Scalar product() const { return mu * tau; }

    friend bool operator==(const DexpParams&, const DexpParams&) = default;
};

using DexpParamsd = DexpParams<double>;

/// Arguments past t = 60 tau are reported as beyond the series horizon.
inline constexpr double kSeriesHorizon = 60.0;

template <typename Scalar>
bool is_distribution_valid(const DexpParams<Scalar>& p)
{
    const Scalar x = p.product();
    return x >= Scalar(0) && x <= Scalar(1) / std::numbers::e_v<Scalar>;
}

template <typename Scalar>
struct DexpValue {
    Scalar value;
    /// Set when t exceeds the direct-series horizon. For distribution-valid
    /// parameters the value then comes from a stable alternative route; for
    /// other parameters it is the series sum with reduced accuracy.
    bool beyond_series_horizon;
};

template <typename Scalar>
struct DexpMoments {
    Scalar mean;
    Scalar variance;
};

/// Real roots of lambda + mu exp(-lambda tau) = 0.
template <typename Scalar>
struct CharacteristicRoots {
    Scalar lambda0;
    Scalar lambda_neg1;
};

namespace detail {

/// Neumaier-compensated accumulator.
template <typename Scalar>
class CompensatedSum {
public:
    void add(Scalar x)
    {
        const Scalar t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    Scalar value() const { return sum_ + comp_; }

private:
    Scalar sum_{0};
    Scalar comp_{0};
};

/// Coefficients (-x)^m / m!. With `truncate`, stops once they are negligible
/// against the at most e-fold growth per step of earlier breakpoint values,
/// which holds for distribution-valid parameters (x = mu * h <= 1/e).
template <typename Scalar>
std::vector<Scalar> taylor_coefficients(Scalar x, std::size_t max_terms, bool truncate = true)
{
    std::vector<Scalar> c;
    c.reserve(24);
    Scalar term = 1;
    const Scalar cutoff = std::numeric_limits<Scalar>::epsilon() * Scalar(1e-4);
    for (std::size_t m = 0; m < max_terms; ++m) {
        c.push_back(term);
        if (truncate && m > 0 && std::abs(term) * std::pow(std::numbers::e_v<Scalar>, Scalar(m)) < cutoff)
            break;
        term *= -x / Scalar(m + 1);
    }
    return c;
}

} // namespace detail

/// Values at the breakpoints n tau, n = 0, 1, ...
///
/// On [n tau, (n+1) tau] the function is a degree-n polynomial whose Taylor
/// coefficients at n tau are (-mu)^m dexp((n-m) tau) / m!, so each breakpoint
/// follows from the earlier ones without the alternating cancellation of the
/// direct series. Generation stops after the first value below `floor` or
/// once `max_count` values exist. Requires tau > 0; for parameters outside
/// the distribution range the full (untruncated) recurrence is used.
template <typename Scalar>
std::vector<Scalar> dexp_breakpoint_values(const DexpParams<Scalar>& p, Scalar floor,
                                           std::size_t max_count)
{
    if (!(p.tau > Scalar(0)))
        throw std::domain_error("dexp_breakpoint_values: tau must be positive");
    const bool valid = is_distribution_valid(p);
    const auto c = detail::taylor_coefficients(p.product(), max_count + 1, valid);
    std::vector<Scalar> v;
    v.reserve(64);
    v.push_back(Scalar(1));
    while (v.size() < max_count && v.back() >= floor) {
        const std::size_t n = v.size() - 1;
        detail::CompensatedSum<Scalar> acc;
        for (std::size_t m = 0; m < c.size() && m <= n; ++m)
            acc.add(c[m] * v[n - m]);
        v.push_back(acc.value());
    }
    return v;
}

/// Evaluates dexp at n tau + h for 0 <= h <= tau from breakpoint values
/// covering indices 0..n. `truncate` as in taylor_coefficients.
template <typename Scalar>
Scalar dexp_from_breakpoints(std::span<const Scalar> breakpoints, std::size_t n, Scalar h,
                             Scalar mu, bool truncate = true)
{
    const Scalar x = mu * h;
    detail::CompensatedSum<Scalar> acc;
    Scalar term = 1;
    const Scalar cutoff = std::numeric_limits<Scalar>::epsilon() * Scalar(1e-4);
    for (std::size_t m = 0; m <= n; ++m) {
        acc.add(term * breakpoints[n - m]);
        term *= -x / Scalar(m + 1);
        if (truncate && std::abs(term) * std::pow(std::numbers::e_v<Scalar>, Scalar(m + 1)) < cutoff)
            break;
    }
    return acc.value();
}

template <typename Scalar>
CharacteristicRoots<Scalar> characteristic_roots(const DexpParams<Scalar>& p)
{
    const Scalar x = p.product();
    if (!(p.tau > Scalar(0)))
        throw std::domain_error("characteristic_roots: tau must be positive");
    if (!(x < Scalar(1) / std::numbers::e_v<Scalar>))
        throw std::domain_error("characteristic_roots: requires mu*tau < 1/e");

    // Newton in extended precision, then the representable neighbour with
    // the smallest residual: |lambda| can be large, so one ulp matters.
    auto polish = [&](Scalar lambda) {
        using Wide = long double;
        const Wide mu = p.mu;
        const Wide tau = p.tau;
        Wide l = lambda;
        for (int i = 0; i < 4; ++i) {
            const Wide g = mu * std::exp(-l * tau);
            const Wide df = Wide(1) - tau * g;
            if (df == Wide(0))
                break;
            l -= (l + g) / df;
        }
        const auto residual = [&](Scalar v) { return std::abs(v + p.mu * std::exp(-v * p.tau)); };
        Scalar best = static_cast<Scalar>(l);
        Scalar best_res = residual(best);
        for (const Scalar dir : {-std::numeric_limits<Scalar>::infinity(), std::numeric_limits<Scalar>::infinity()}) {
            const Scalar v = std::nextafter(static_cast<Scalar>(l), dir);
            if (residual(v) < best_res) {
                best = v;
                best_res = residual(v);
            }
        }
        return best;
    };
    const Scalar w0 = lambert_w(LambertBranch::principal, -x);
    const Scalar wm1 = lambert_w(LambertBranch::lower, -x);
    return {polish(w0 / p.tau), polish(wm1 / p.tau)};
}

/// Largest t / tau evaluated for parameters outside the distribution range;
/// the recurrence there costs O((t / tau)^2).
inline constexpr double kMaxInvalidRatio = 1e4;

/// Delay exponential function dexp(-mu t; -mu tau) with an indication of
/// whether t lies beyond the series horizon.
///
/// The finite series is evaluated as local Taylor expansions about the
/// breakpoints, which is the same polynomial without the alternating
/// cancellation of summing around the origin; it keeps full relative
/// accuracy deep in the tail.
template <typename Scalar>
DexpValue<Scalar> dexp_eval_checked(Scalar t, const DexpParams<Scalar>& p)
{
    if (!std::isfinite(t))
        throw std::domain_error("dexp_eval: t must be finite");
    if (t < Scalar(0))
        return {Scalar(0), false};
    if (p.tau == Scalar(0))
        return {std::exp(-p.mu * t), false};

    const Scalar ratio = t / p.tau;
    if (ratio < Scalar(1))
        return {Scalar(1), false};
    const bool beyond = ratio > Scalar(kSeriesHorizon);
    const bool valid = is_distribution_valid(p);

    if (!valid && ratio > Scalar(kMaxInvalidRatio))
        throw std::domain_error("dexp_eval: too many series terms for these parameters");

    // Dominant-root asymptotic exp(lambda0 t) / (1 + lambda0 tau) once the
    // next root's contribution is below rounding.
    const Scalar x = p.product();
    if (beyond && valid && x < Scalar(1) / std::numbers::e_v<Scalar>) {
        const Scalar w0 = lambert_w(LambertBranch::principal, -x);
        const Scalar wm1 = lambert_w(LambertBranch::lower, -x);
        const Scalar tail = std::exp((wm1 - w0) * ratio) * std::abs((Scalar(1) + w0) / (Scalar(1) + wm1));
        if (tail < Scalar(1e-18)) {
            const Scalar lambda0 = characteristic_roots(p).lambda0;
            return {std::exp(lambda0 * t) / (Scalar(1) + lambda0 * p.tau), true};
        }
    }

    const auto n = static_cast<std::size_t>(std::floor(ratio));
    const Scalar floor = valid ? std::numeric_limits<Scalar>::min() : -std::numeric_limits<Scalar>::infinity();
    const auto bp = dexp_breakpoint_values(p, floor, n + 1);
    // a valid survival function that has underflowed stays at zero
    if (bp.size() <= n)
        return {Scalar(0), beyond};
    const Scalar h = std::clamp(t - Scalar(n) * p.tau, Scalar(0), p.tau);
    return {dexp_from_breakpoints(std::span<const Scalar>(bp), n, h, p.mu, valid), beyond};
}

template <typename Scalar>
Scalar dexp_eval(Scalar t, const DexpParams<Scalar>& p)
{
    return dexp_eval_checked(t, p).value;
}

/// Waiting-time density mu * dexp(-mu (t - tau); -mu tau).
template <typename Scalar>
Scalar dexp_density(Scalar t, const DexpParams<Scalar>& p)
{
    if (!is_distribution_valid(p))
        throw std::domain_error("dexp_density: requires mu*tau <= 1/e");
    if (p.tau == Scalar(0))
        return t < Scalar(0) ? Scalar(0) : p.mu * std::exp(-p.mu * t);
    return p.mu * dexp_eval(t - p.tau, p);
}

template <typename Scalar>
DexpMoments<Scalar> moments(const DexpParams<Scalar>& p)
{
    if (!is_distribution_valid(p))
        throw std::domain_error("moments: requires mu*tau <= 1/e");
    const Scalar inv = Scalar(1) / p.mu;
    return {inv, inv * inv * (Scalar(1) - Scalar(2) * p.product())};
}

/// Moment generating function 1 / (1 - s exp(-s tau) / mu). Rejects s where
/// the denominator is not positive.
template <typename Scalar>
Scalar mgf(Scalar s, const DexpParams<Scalar>& p)
{
    if (!is_distribution_valid(p))
        throw std::domain_error("mgf: requires mu*tau <= 1/e");
    const Scalar denom = Scalar(1) - s * std::exp(-s * p.tau) / p.mu;
    if (!(denom > Scalar(0)) || !std::isfinite(denom))
        throw std::domain_error("mgf: s outside the convergence region");
    return Scalar(1) / denom;
}

/// Laplace transform of the survival function, 1 / (s + mu exp(-s tau)).
template <typename Scalar>
Scalar laplace_survival(Scalar s, const DexpParams<Scalar>& p)
{
    if (!(s > Scalar(0)))
        throw std::domain_error("laplace_survival: s must be positive");
    return Scalar(1) / (s + p.mu * std::exp(-s * p.tau));
}

} // namespace delaysim
