#include "doctest.h"

#include <cmath>
#include <numbers>

#include "delaysim/ssa.hpp"

using namespace delaysim;

namespace {

ModelSpec single(std::int64_t x0, double horizon, std::size_t points)
{
    ModelSpec spec;
    spec.compartments = {{0, "X"}};
    spec.initial_counts = {x0};
    spec.horizon = horizon;
    spec.record_grid = uniform_grid(horizon, points);
    return spec;
}

ModelSpec pure_death(double rate)
{
    auto spec = single(1000, 3.0, 31);
    spec.markov.push_back({"death", 0, std::nullopt, {RateKind::per_capita, rate, {0}}});
    return spec;
}

ModelSpec pure_delay(double mu, double tau)
{
    auto spec = single(1000, 5.0, 51);
    spec.delays.push_back({"exit", 0, std::nullopt, DexpParamsd(mu, tau)});
    return spec;
}

template <typename F>
double simpson(F f, double a, double b, int n)
{
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i)
        s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

} // namespace

TEST_CASE("clock heap keeps the earliest on top")
{
    DelayClockSet set;
    for (const double t : {5.0, 1.0, 4.0, 2.0, 3.0})
        set.push({t, 0.0});
    CHECK(set.size() == 5);
    CHECK(set.earliest().fire_time == 1.0);
    set.remove_at(0);
    CHECK(set.earliest().fire_time == 2.0);
    // remove an arbitrary slot and drain in order
    set.remove_at(set.size() - 1);
    double prev = 0.0;
    while (!set.empty()) {
        const auto c = set.pop_earliest();
        CHECK(c.fire_time >= prev);
        prev = c.fire_time;
    }
}

TEST_CASE("pure death matches the exponential mean")
{
    const auto spec = pure_death(1.0);
    const auto summary = run_ensemble(spec, 2000, 3);
    for (std::size_t j = 0; j < summary.grid.size(); ++j) {
        const double expect = 1000 * std::exp(-summary.grid[j]);
        const double se = summary.std_error(static_cast<Eigen::Index>(j), 0);
        if (j == 0)
            CHECK(summary.mean(0, 0) == 1000.0);
        else
            CHECK(std::abs(summary.mean(static_cast<Eigen::Index>(j), 0) - expect) <= 3 * se);
    }
}

TEST_CASE("pure delay matches the survival function")
{
    const DexpParamsd p(1, 0.3);
    const auto summary = run_ensemble(pure_delay(p.mu, p.tau), 2000, 11);
    for (std::size_t j = 0; j < summary.grid.size(); ++j) {
        const auto row = static_cast<Eigen::Index>(j);
        const double expect = 1000 * dexp_eval(summary.grid[j], p);
        const double se = summary.std_error(row, 0);
        if (summary.grid[j] < p.tau)
            CHECK(summary.mean(row, 0) == 1000.0);
        else
            CHECK(std::abs(summary.mean(row, 0) - expect) <= 3 * se);
    }
}

TEST_CASE("delay firings respect the minimum delay")
{
    const auto spec = preset_sis(0.1, 0.1, 0.02, 1.0, 0.3, 95, 5);
    RngStream rng(8, 0);
    PathOptions opts;
    opts.record_events = true;
    const auto traj = run_path(spec, rng, opts);
    std::size_t delays = 0;
    double prev = 0.0;
    for (const auto& e : traj.events) {
        CHECK(e.time > prev);
        prev = e.time;
        CHECK(e.time <= spec.horizon);
        if (e.kind == EventKind::delay) {
            ++delays;
            CHECK(e.dwell >= 0.3);
            CHECK(e.source == 1u);
            CHECK(e.target == 0u);
        }
    }
    CHECK(delays > 0);
    CHECK(traj.event_count == traj.events.size());
}

TEST_CASE("counts at grid replay the event log")
{
    const auto spec = preset_pk(1, 1, 0.2, 100);
    RngStream rng(21, 0);
    PathOptions opts;
    opts.record_events = true;
    const auto traj = run_path(spec, rng, opts);
    std::vector<std::int64_t> x = spec.initial_counts;
    std::size_t next = 0;
    for (std::size_t j = 0; j < traj.grid.size(); ++j) {
        while (next < traj.events.size() && traj.events[next].time <= traj.grid[j]) {
            const auto& e = traj.events[next++];
            if (e.source)
                --x[*e.source];
            if (e.target)
                ++x[*e.target];
        }
        for (std::size_t i = 0; i < x.size(); ++i)
            REQUIRE(traj.counts_at_grid(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) == x[i]);
    }
    // closed system from x to A to the sink: everything eventually clears
    CHECK(traj.final_state.counts[0] + traj.final_state.counts[1] <= 100);
}

TEST_CASE("competition between death and the delay channel")
{
    // Each particle leaves through the delay with probability
    // int_0^inf e^{-d t} psi(t) dt.
    const double d = 0.5;
    const DexpParamsd p(1.0, 0.3);
    ModelSpec spec = single(1000, 60.0, 2);
    spec.markov.push_back({"death", 0, std::nullopt, {RateKind::per_capita, d, {0}}});
    spec.delays.push_back({"exit", 0, std::nullopt, p});

    double expect = 0.0;
    for (double a = p.tau; a < 60.0; a += p.tau)
        expect += simpson([&](double t) { return std::exp(-d * t) * dexp_density(t, p); }, a, a + p.tau, 64);

    std::size_t via_delay = 0;
    std::size_t total = 0;
    PathOptions opts;
    opts.record_events = true;
    for (std::uint64_t r = 0; r < 100; ++r) {
        RngStream rng(5, r);
        const auto traj = run_path(spec, rng, opts);
        for (const auto& e : traj.events) {
            ++total;
            via_delay += e.kind == EventKind::delay;
        }
    }
    REQUIRE(total == 100000);
    const double frac = static_cast<double>(via_delay) / static_cast<double>(total);
    const double se = std::sqrt(expect * (1 - expect) / static_cast<double>(total));
    CHECK(std::abs(frac - expect) <= 3 * se);
}

TEST_CASE("single path ensemble equals the trajectory")
{
    const auto spec = preset_sis(0.1, 0.1, 0.02, 1.0, 0.2, 95, 5);
    const auto summary = run_ensemble(spec, 1, 4);
    RngStream rng(4, 0);
    const auto traj = run_path(spec, rng);
    CHECK(summary.n_paths == 1);
    CHECK(summary.mean == traj.counts_at_grid.cast<double>());
    CHECK(summary.variance.isZero(0.0));
    CHECK(summary.std_error.isZero(0.0));
}

TEST_CASE("ensembles are reproducible across runs and thread counts")
{
    const auto spec = preset_sis(0.1, 0.1, 0.02, 1.0, 0.2, 95, 5);
    EnsembleOptions one;
    one.parallelism = 1;
    one.extinction_compartment = 1;
    EnsembleOptions four = one;
    four.parallelism = 4;
    const auto a = run_ensemble(spec, 64, 9, one);
    const auto b = run_ensemble(spec, 64, 9, one);
    const auto c = run_ensemble(spec, 64, 9, four);
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);
    CHECK(a.mean == c.mean);
    CHECK(a.variance == c.variance);
    CHECK(a.extinction->extinct_paths == c.extinction->extinct_paths);
    const auto d = run_ensemble(spec, 64, 10, one);
    CHECK(a.mean != d.mean);
}

TEST_CASE("small population epidemics can die out")
{
    const auto spec = preset_sis(0.1, 0.1, 0.02, 1.0, 0.2, 95, 5);
    EnsembleOptions opts;
    opts.extinction_compartment = spec.index_of("I");
    const auto summary = run_ensemble(spec, 400, 1, opts);
    REQUIRE(summary.extinction.has_value());
    CHECK(summary.extinction->extinct_paths > 0);
    CHECK(summary.extinction->fraction > 0.0);
    CHECK(summary.extinction->fraction < 1.0);
}

TEST_CASE("a path with no possible events stays frozen")
{
    auto spec = pure_death(1.0);
    spec.initial_counts = {0};
    RngStream rng(1, 0);
    const auto traj = run_path(spec, rng);
    CHECK(traj.event_count == 0);
    CHECK(traj.counts_at_grid.isZero(0));
    CHECK(traj.first_zero_time[0] == 0.0);
}

TEST_CASE("event limit aborts the path")
{
    const auto spec = pure_death(1.0);
    RngStream rng(1, 0);
    PathOptions opts;
    opts.max_events = 10;
    CHECK_THROWS_AS(run_path(spec, rng, opts), SimulationError);
}

TEST_CASE("invalid specs are rejected up front")
{
    auto spec = pure_delay(1, 0.3);
    spec.initial_counts = {-1};
    CHECK_THROWS(PathSimulator{spec});
    CHECK_THROWS(run_ensemble(pure_delay(1, 0.3), 0, 1));
}
