#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "delaysim/dexp.hpp"

namespace delaysim {

struct CompartmentId {
    std::size_t index;
    std::string name;

    friend bool operator==(const CompartmentId&, const CompartmentId&) = default;
};

enum class RateKind { constant_influx, per_capita, mass_action, population_birth };

std::string_view to_string(RateKind kind);
std::optional<RateKind> parse_rate_kind(std::string_view text);

/// Rate of a Markovian process as a function of the current counts.
///
/// constant_influx: c
/// per_capita: c * x[a]
/// mass_action: c * x[a] * x[b]
/// population_birth: c * sum of x over the operands
struct RateLaw {
    RateKind kind = RateKind::per_capita;
    double coefficient = 0.0;
    std::vector<std::size_t> operands;

    friend bool operator==(const RateLaw&, const RateLaw&) = default;
};

/// Source `nullopt` means an external source; target `nullopt` means a sink.
struct MarkovianProcess {
    std::string label;
    std::optional<std::size_t> source;
    std::optional<std::size_t> target;
    RateLaw law;

    friend bool operator==(const MarkovianProcess&, const MarkovianProcess&) = default;
};

/// Delayed removal from `source` with a delay exponential waiting time.
struct DelayProcess {
    std::string label;
    std::size_t source = 0;
    std::optional<std::size_t> target;
    DexpParamsd params;

    friend bool operator==(const DelayProcess&, const DelayProcess&) = default;
};

struct ModelSpec {
    std::vector<CompartmentId> compartments;
    std::vector<MarkovianProcess> markov;
    std::vector<DelayProcess> delays;
    /// Particles placed in each compartment at t = 0; empty beforehand.
    std::vector<std::int64_t> initial_counts;
    double horizon = 0.0;
    std::vector<double> record_grid;

    std::size_t size() const { return compartments.size(); }
    std::optional<std::size_t> find(std::string_view name) const;
    /// Throws std::invalid_argument when the name is unknown.
    std::size_t index_of(std::string_view name) const;
    /// Index of the delay process attached to `compartment`, if any.
    std::optional<std::size_t> delay_of(std::size_t compartment) const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

template <typename Counts>
double evaluate_rate(const RateLaw& law, const Counts& x)
{
    const auto at = [&](std::size_t i) { return static_cast<double>(x[i]); };
    switch (law.kind) {
    case RateKind::constant_influx:
        return law.coefficient;
    case RateKind::per_capita:
        return law.coefficient * at(law.operands[0]);
    case RateKind::mass_action:
        return law.coefficient * at(law.operands[0]) * at(law.operands[1]);
    case RateKind::population_birth: {
        double total = 0.0;
        for (const auto i : law.operands)
            total += at(i);
        return law.coefficient * total;
    }
    }
    return 0.0;
}

struct Diagnostic {
    std::string subject;
    std::string rule;

    std::string message() const { return subject + ": " + rule; }
};

/// Checks every structural invariant of a ModelSpec; empty result means valid.
std::vector<Diagnostic> validate(const ModelSpec& spec);

/// Throws std::invalid_argument listing the diagnostics when `spec` is invalid.
void require_valid(const ModelSpec& spec);

/// `points` evenly spaced times on [0, horizon].
std::vector<double> uniform_grid(double horizon, std::size_t points);

inline constexpr std::size_t kDefaultGridPoints = 200;

/// Transport compartment x feeding target A at rate k, with delayed clearance
/// from A (scale mu = C/V, delay tau). Horizon 10.
ModelSpec preset_pk(double k, double mu, double tau, std::int64_t x0);

/// SIS with births b(S + I), deaths d from both compartments, infection
/// lambda S I and delayed re-susceptibility I -> S with scale gamma and delay
/// tau. Horizon 30.
ModelSpec preset_sis(double b, double d, double lambda, double gamma, double tau, std::int64_t s0,
                     std::int64_t i0);

} // namespace delaysim
