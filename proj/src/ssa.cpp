#include "delaysim/ssa.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>
#include <utility>

namespace delaysim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool earlier(const DelayClock& a, const DelayClock& b)
{
    return a.fire_time < b.fire_time;
}

} // namespace

void DelayClockSet::push(DelayClock clock)
{
    heap_.push_back(clock);
    sift_up(heap_.size() - 1);
}

DelayClock DelayClockSet::pop_earliest()
{
    return remove_at(0);
}

DelayClock DelayClockSet::remove_at(std::size_t slot)
{
    const DelayClock removed = heap_[slot];
    heap_[slot] = heap_.back();
    heap_.pop_back();
    if (slot < heap_.size()) {
        sift_up(slot);
        sift_down(slot);
    }
    return removed;
}

void DelayClockSet::sift_up(std::size_t i)
{
    while (i > 0) {
        const std::size_t parent = (i - 1) / 2;
        if (!earlier(heap_[i], heap_[parent]))
            break;
        std::swap(heap_[i], heap_[parent]);
        i = parent;
    }
}

void DelayClockSet::sift_down(std::size_t i)
{
    const std::size_t n = heap_.size();
    for (;;) {
        const std::size_t l = 2 * i + 1;
        const std::size_t r = l + 1;
        std::size_t best = i;
        if (l < n && earlier(heap_[l], heap_[best]))
            best = l;
        if (r < n && earlier(heap_[r], heap_[best]))
            best = r;
        if (best == i)
            return;
        std::swap(heap_[i], heap_[best]);
        i = best;
    }
}

PathSimulator::PathSimulator(ModelSpec spec) : spec_(std::move(spec))
{
    require_valid(spec_);
    const std::size_t n = spec_.size();
    groups_.assign(n + 1, {});
    for (std::size_t k = 0; k < spec_.markov.size(); ++k) {
        const auto& src = spec_.markov[k].source;
        groups_[src ? *src : n].push_back(k);
    }
    delay_of_.assign(n, std::nullopt);
    for (std::size_t k = 0; k < spec_.delays.size(); ++k) {
        delay_of_[spec_.delays[k].source] = k;
        tables_.emplace_back(spec_.delays[k].params);
    }
}

Trajectory PathSimulator::run(RngStream& rng, const PathOptions& options) const
{
    const std::size_t n = spec_.size();
    const std::size_t n_groups = groups_.size();
    const auto& grid = spec_.record_grid;

    Trajectory traj;
    traj.grid = grid;
    traj.counts_at_grid.resize(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(n));
    traj.first_zero_time.assign(n, kInf);

    std::vector<std::int64_t> counts = spec_.initial_counts;
    std::vector<DelayClockSet> clocks(n);
    std::vector<double> group_rate(n_groups, 0.0);
    std::vector<double> group_fire(n_groups, kInf);
    std::vector<double> process_rate(spec_.markov.size(), 0.0);

    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (counts[i] == 0)
            traj.first_zero_time[i] = 0.0;
        if (const auto k = delay_of_[i]) {
            for (std::int64_t p = 0; p < counts[i]; ++p)
                clocks[i].push({t + sample_dexp(rng, tables_[*k]), t});
        }
    }

    const auto group_total = [&](std::size_t g) {
        double total = 0.0;
        for (const auto k : groups_[g]) {
            process_rate[k] = evaluate_rate(spec_.markov[k].law, counts);
            total += process_rate[k];
        }
        return total;
    };
    for (std::size_t g = 0; g < n_groups; ++g) {
        group_rate[g] = group_total(g);
        group_fire[g] = t + sample_markov_holding(rng, group_rate[g]);
    }

    const auto enter = [&](std::size_t i) {
        ++counts[i];
        if (const auto k = delay_of_[i])
            clocks[i].push({t + sample_dexp(rng, tables_[*k]), t});
    };
    const auto leave = [&](std::size_t i) {
        if (--counts[i] < 0)
            throw SimulationError("negative count in compartment '" + spec_.compartments[i].name + "'");
        if (counts[i] == 0 && traj.first_zero_time[i] == kInf)
            traj.first_zero_time[i] = t;
    };

    std::size_t row = 0;
    const auto record_until = [&](double limit, bool inclusive) {
        while (row < grid.size() && (grid[row] < limit || (inclusive && grid[row] <= limit))) {
            for (std::size_t i = 0; i < n; ++i)
                traj.counts_at_grid(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(i)) = counts[i];
            ++row;
        }
    };

    for (;;) {
        // Next transition; ties go to the lower compartment index, and to the
        // delay clock before the Markovian processes of the same compartment.
        double next = kInf;
        std::size_t where = 0;
        bool is_delay = false;
        for (std::size_t g = 0; g < n_groups; ++g) {
            if (g < n && !clocks[g].empty() && clocks[g].earliest().fire_time < next) {
                next = clocks[g].earliest().fire_time;
                where = g;
                is_delay = true;
            }
            if (group_fire[g] < next) {
                next = group_fire[g];
                where = g;
                is_delay = false;
            }
        }
        if (!(next <= spec_.horizon))
            break;
        if (traj.event_count >= options.max_events)
            throw SimulationError("event limit exceeded");

        record_until(next, false);
        t = next;
        ++traj.event_count;

        if (is_delay) {
            const DelayClock clock = clocks[where].pop_earliest();
            const auto& proc = spec_.delays[*delay_of_[where]];
            leave(where);
            if (proc.target)
                enter(*proc.target);
            if (options.record_events)
                traj.events.push_back({t, EventKind::delay, *delay_of_[where], where, proc.target,
                                       t - clock.entry_time});
        } else {
            // Gillespie selection within the group.
            const double threshold = rng.uniform_open() * group_rate[where];
            std::size_t chosen = groups_[where].front();
            double cumulative = 0.0;
            for (const auto k : groups_[where]) {
                if (process_rate[k] <= 0.0)
                    continue;
                chosen = k;
                cumulative += process_rate[k];
                if (threshold <= cumulative)
                    break;
            }
            const auto& proc = spec_.markov[chosen];
            if (proc.source) {
                const std::size_t s = *proc.source;
                if (delay_of_[s]) {
                    if (clocks[s].empty())
                        throw SimulationError("departure from '" + spec_.compartments[s].name +
                                              "' with no delay clock");
                    const auto slot = static_cast<std::size_t>(rng.uniform_open() *
                                                               static_cast<double>(clocks[s].size()));
                    clocks[s].remove_at(std::min(slot, clocks[s].size() - 1));
                }
                leave(s);
            }
            if (proc.target)
                enter(*proc.target);
            if (options.record_events)
                traj.events.push_back({t, EventKind::markov, chosen, proc.source, proc.target});
        }

        // Redraw holding times that fired or whose total rate changed.
        for (std::size_t g = 0; g < n_groups; ++g) {
            const double rate = group_total(g);
            const bool fired = !is_delay && g == where;
            if (fired || rate != group_rate[g]) {
                group_rate[g] = rate;
                group_fire[g] = t + sample_markov_holding(rng, rate);
            }
        }

        if (options.check_invariants) {
            for (std::size_t i = 0; i < n; ++i) {
                if (delay_of_[i] && clocks[i].size() != static_cast<std::size_t>(counts[i]))
                    throw SimulationError("clock count mismatch in compartment '" +
                                          spec_.compartments[i].name + "'");
            }
        }
    }

    record_until(spec_.horizon, true);
    traj.final_state = {t, counts};
    return traj;
}

Trajectory run_path(const ModelSpec& spec, RngStream& rng, const PathOptions& options)
{
    return PathSimulator(spec).run(rng, options);
}

EnsembleSummary run_ensemble(const ModelSpec& spec, std::size_t n_paths, std::uint64_t seed,
                             const EnsembleOptions& options)
{
    if (n_paths == 0)
        throw std::invalid_argument("run_ensemble: n_paths must be at least 1");
    const PathSimulator sim(spec);
    const std::size_t n = spec.size();
    const std::size_t rows = spec.record_grid.size();
    if (options.extinction_compartment && *options.extinction_compartment >= n)
        throw std::invalid_argument("run_ensemble: extinction compartment out of range");

    std::vector<CountMatrix> counts(n_paths);
    std::vector<char> extinct(n_paths, 0);
    std::vector<Trajectory> kept(std::min(options.keep_paths, n_paths));
    std::vector<std::exception_ptr> errors(n_paths);

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= n_paths)
                return;
            try {
                RngStream rng(seed, r);
                Trajectory traj = sim.run(rng);
                if (options.extinction_compartment)
                    extinct[r] = traj.first_zero_time[*options.extinction_compartment] <= spec.horizon;
                counts[r] = std::move(traj.counts_at_grid);
                if (r < kept.size()) {
                    traj.counts_at_grid = counts[r];
                    kept[r] = std::move(traj);
                }
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };

    std::size_t threads = options.parallelism;
    if (threads == 0)
        threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    threads = std::min(threads, n_paths);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t w = 0; w < threads; ++w)
            pool.emplace_back(worker);
    }

    for (std::size_t r = 0; r < n_paths; ++r) {
        if (!errors[r])
            continue;
        try {
            std::rethrow_exception(errors[r]);
        } catch (const std::exception& e) {
            throw EnsembleError(r, e.what());
        }
    }

    EnsembleSummary summary;
    summary.grid = spec.record_grid;
    for (const auto& c : spec.compartments)
        summary.names.push_back(c.name);
    summary.n_paths = n_paths;

    const auto R = static_cast<Eigen::Index>(rows);
    const auto C = static_cast<Eigen::Index>(n);
    summary.mean = Eigen::MatrixXd::Zero(R, C);
    for (std::size_t r = 0; r < n_paths; ++r)
        summary.mean += counts[r].cast<double>();
    summary.mean /= static_cast<double>(n_paths);

    summary.variance = Eigen::MatrixXd::Zero(R, C);
    if (n_paths > 1) {
        for (std::size_t r = 0; r < n_paths; ++r)
            summary.variance += (counts[r].cast<double>() - summary.mean).array().square().matrix();
        summary.variance /= static_cast<double>(n_paths - 1);
    }
    summary.std_error = (summary.variance / static_cast<double>(n_paths)).array().sqrt().matrix();

    if (options.extinction_compartment) {
        std::size_t hits = 0;
        for (const char e : extinct)
            hits += e ? 1 : 0;
        summary.extinction = ExtinctionStats{*options.extinction_compartment, hits,
                                             static_cast<double>(hits) / static_cast<double>(n_paths)};
    }
    summary.kept_paths = std::move(kept);
    return summary;
}

} // namespace delaysim
