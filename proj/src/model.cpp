#include "delaysim/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace delaysim {

namespace {

constexpr std::string_view kRateKindNames[] = {"constant_influx", "per_capita", "mass_action",
                                               "population_birth"};

std::string markov_subject(const ModelSpec& spec, std::size_t i)
{
    const auto& p = spec.markov[i];
    return "markov[" + std::to_string(i) + "]" + (p.label.empty() ? "" : " '" + p.label + "'");
}

std::string delay_subject(const ModelSpec& spec, std::size_t i)
{
    const auto& p = spec.delays[i];
    return "delays[" + std::to_string(i) + "]" + (p.label.empty() ? "" : " '" + p.label + "'");
}

void check_markov(const ModelSpec& spec, std::size_t i, std::vector<Diagnostic>& out)
{
    const auto n = spec.size();
    const auto& p = spec.markov[i];
    const auto subject = markov_subject(spec, i);
    const auto fail = [&](std::string rule) { out.push_back({subject, std::move(rule)}); };

    if (p.source && *p.source >= n)
        return fail("source references an undeclared compartment");
    if (p.target && *p.target >= n)
        return fail("target references an undeclared compartment");
    if (!p.source && !p.target)
        return fail("process needs a compartment at one end");
    if (p.source && p.target && *p.source == *p.target)
        return fail("source and target are the same compartment");
    if (!(p.law.coefficient >= 0.0) || !std::isfinite(p.law.coefficient))
        return fail("coefficient must be finite and non-negative");
    for (const auto op : p.law.operands)
        if (op >= n)
            return fail("operand references an undeclared compartment");

    const auto& ops = p.law.operands;
    switch (p.law.kind) {
    case RateKind::constant_influx:
        if (!ops.empty())
            return fail("constant_influx takes no operands");
        if (p.source)
            return fail("constant_influx requires an external source");
        break;
    case RateKind::population_birth: {
        if (ops.empty())
            return fail("population_birth needs at least one operand");
        if (std::set<std::size_t>(ops.begin(), ops.end()).size() != ops.size())
            return fail("population_birth operands must be distinct");
        if (p.source)
            return fail("population_birth requires an external source");
        break;
    }
    case RateKind::per_capita:
        if (ops.size() != 1)
            return fail("per_capita takes exactly one operand");
        if (!p.source || ops[0] != *p.source)
            return fail("per_capita operand must be the source compartment");
        break;
    case RateKind::mass_action:
        if (ops.size() != 2)
            return fail("mass_action takes exactly two operands");
        if (!p.source || (ops[0] != *p.source && ops[1] != *p.source))
            return fail("mass_action operands must include the source compartment");
        break;
    }
}

} // namespace

std::string_view to_string(RateKind kind)
{
    return kRateKindNames[static_cast<std::size_t>(kind)];
}

std::optional<RateKind> parse_rate_kind(std::string_view text)
{
    for (std::size_t i = 0; i < std::size(kRateKindNames); ++i)
        if (kRateKindNames[i] == text)
            return static_cast<RateKind>(i);
    return std::nullopt;
}

std::optional<std::size_t> ModelSpec::find(std::string_view name) const
{
    for (const auto& c : compartments)
        if (c.name == name)
            return c.index;
    return std::nullopt;
}

std::size_t ModelSpec::index_of(std::string_view name) const
{
    if (auto i = find(name))
        return *i;
    throw std::invalid_argument("unknown compartment '" + std::string(name) + "'");
}

std::optional<std::size_t> ModelSpec::delay_of(std::size_t compartment) const
{
    for (std::size_t k = 0; k < delays.size(); ++k)
        if (delays[k].source == compartment)
            return k;
    return std::nullopt;
}

std::vector<Diagnostic> validate(const ModelSpec& spec)
{
    std::vector<Diagnostic> out;
    const auto n = spec.size();

    if (n == 0)
        out.push_back({"compartments", "at least one compartment is required"});
    std::set<std::string> names;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = spec.compartments[i];
        const auto subject = "compartments[" + std::to_string(i) + "]";
        if (c.index != i)
            out.push_back({subject, "indices must be dense 0..N-1 in declaration order"});
        if (c.name.empty())
            out.push_back({subject, "name must not be empty"});
        else if (c.name == "external" || c.name == "sink")
            out.push_back({subject, "name '" + c.name + "' is reserved"});
        else if (!names.insert(c.name).second)
            out.push_back({subject, "duplicate name '" + c.name + "'"});
    }

    for (std::size_t i = 0; i < spec.markov.size(); ++i)
        check_markov(spec, i, out);

    std::set<std::size_t> delayed_sources;
    for (std::size_t i = 0; i < spec.delays.size(); ++i) {
        const auto& d = spec.delays[i];
        const auto subject = delay_subject(spec, i);
        if (d.source >= n) {
            out.push_back({subject, "source references an undeclared compartment"});
            continue;
        }
        if (d.target && *d.target >= n)
            out.push_back({subject, "target references an undeclared compartment"});
        else if (d.target && *d.target == d.source)
            out.push_back({subject, "source and target are the same compartment"});
        if (!delayed_sources.insert(d.source).second)
            out.push_back({subject, "at most one delay removal process per compartment"});
        if (!is_distribution_valid(d.params))
            out.push_back({subject, "mu*tau must not exceed 1/e for a valid survival function"});
    }

    if (spec.initial_counts.size() != n)
        out.push_back({"initial", "one initial count per compartment is required"});
    for (std::size_t i = 0; i < spec.initial_counts.size(); ++i)
        if (spec.initial_counts[i] < 0)
            out.push_back({"initial[" + std::to_string(i) + "]", "counts must be non-negative"});

    if (!(spec.horizon > 0.0) || !std::isfinite(spec.horizon))
        out.push_back({"horizon", "must be positive and finite"});

    if (spec.record_grid.empty())
        out.push_back({"grid", "at least one recording time is required"});
    for (std::size_t j = 0; j < spec.record_grid.size(); ++j) {
        const double g = spec.record_grid[j];
        const auto subject = "grid[" + std::to_string(j) + "]";
        if (!std::isfinite(g) || g < 0.0 || g > spec.horizon) {
            out.push_back({subject, "times must lie within [0, horizon]"});
            break;
        }
        if (j > 0 && !(g > spec.record_grid[j - 1])) {
            out.push_back({subject, "times must be strictly increasing"});
            break;
        }
    }
    return out;
}

void require_valid(const ModelSpec& spec)
{
    const auto diags = validate(spec);
    if (diags.empty())
        return;
    std::string msg = "invalid model:";
    for (const auto& d : diags)
        msg += "\n  " + d.message();
    throw std::invalid_argument(msg);
}

std::vector<double> uniform_grid(double horizon, std::size_t points)
{
    if (points == 0)
        throw std::invalid_argument("grid needs at least one point");
    if (points == 1)
        return {horizon};
    std::vector<double> grid(points);
    const auto last = static_cast<double>(points - 1);
    for (std::size_t j = 0; j < points; ++j)
        grid[j] = horizon * (static_cast<double>(j) / last);
    grid.back() = horizon;
    return grid;
}

ModelSpec preset_pk(double k, double mu, double tau, std::int64_t x0)
{
    if (!(k > 0.0) || !(mu > 0.0) || !(tau >= 0.0) || x0 < 0)
        throw std::invalid_argument("pk preset: k and mu must be positive, tau and x0 non-negative");
    const DexpParamsd clearance(mu, tau);
    if (!is_distribution_valid(clearance))
        throw std::invalid_argument("pk preset: mu*tau exceeds 1/e");

    ModelSpec spec;
    spec.compartments = {{0, "x"}, {1, "A"}};
    spec.markov.push_back({"transfer", 0, 1, {RateKind::per_capita, k, {0}}});
    spec.delays.push_back({"clearance", 1, std::nullopt, clearance});
    spec.initial_counts = {x0, 0};
    spec.horizon = 10.0;
    spec.record_grid = uniform_grid(spec.horizon, kDefaultGridPoints);
    return spec;
}

ModelSpec preset_sis(double b, double d, double lambda, double gamma, double tau, std::int64_t s0,
                     std::int64_t i0)
{
    if (!(b >= 0.0) || !(d >= 0.0) || !(lambda >= 0.0) || !(gamma > 0.0) || !(tau >= 0.0) || s0 < 0 ||
        i0 < 0)
        throw std::invalid_argument("sis preset: parameters must be non-negative and gamma positive");
    const DexpParamsd recovery(gamma, tau);
    if (!is_distribution_valid(recovery))
        throw std::invalid_argument("sis preset: gamma*tau exceeds 1/e");

    ModelSpec spec;
    spec.compartments = {{0, "S"}, {1, "I"}};
    spec.markov.push_back({"infection", 0, 1, {RateKind::mass_action, lambda, {0, 1}}});
    spec.markov.push_back({"death_S", 0, std::nullopt, {RateKind::per_capita, d, {0}}});
    spec.markov.push_back({"death_I", 1, std::nullopt, {RateKind::per_capita, d, {1}}});
    spec.markov.push_back({"birth", std::nullopt, 0, {RateKind::population_birth, b, {0, 1}}});
    spec.delays.push_back({"recovery", 1, 0, recovery});
    spec.initial_counts = {s0, i0};
    spec.horizon = 30.0;
    spec.record_grid = uniform_grid(spec.horizon, kDefaultGridPoints);
    return spec;
}

} // namespace delaysim
