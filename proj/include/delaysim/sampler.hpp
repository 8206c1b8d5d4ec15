#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "delaysim/dexp.hpp"
#include "delaysim/rng.hpp"

namespace delaysim {

/// Precomputed survival values at multiples of tau, used to bracket and
/// invert u = dexp(-mu t; -mu tau). Immutable after construction.
class DexpQuantileTable {
public:
    /// Uniform draws are clamped to [kUniformMin, kUniformMax].
    static constexpr double kUniformMin = 1e-12;
    static constexpr double kUniformMax = 1.0 - 1e-16;
    /// Upper bound on stored breakpoints; reached only for mu*tau below ~4e-4.
    static constexpr std::size_t kMaxBreakpoints = std::size_t{1} << 16;

    explicit DexpQuantileTable(const DexpParamsd& params);

    const DexpParamsd& params() const { return params_; }

    /// Values dexp(n tau) for n = 0 .. n_max; empty when tau = 0.
    std::span<const double> breakpoint_values() const { return values_; }

    /// Survival function evaluated through the table.
    double survival(double t) const;

    /// Generalized inverse inf{ t : survival(t) <= u } of the clamped u.
    double quantile(double u) const;

private:
    double bracketed_root(std::size_t upper_index, double u) const;

    DexpParamsd params_;
    std::vector<double> values_;
    double tail_rate_ = 0.0;
};

double sample_dexp(RngStream& rng, const DexpQuantileTable& table);

/// Exponential holding time for a total rate, +infinity when the rate is 0.
double markov_holding_from_uniform(double u, double total_rate);
double sample_markov_holding(RngStream& rng, double total_rate);

} // namespace delaysim
