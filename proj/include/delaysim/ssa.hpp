#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "delaysim/model.hpp"
#include "delaysim/rng.hpp"
#include "delaysim/sampler.hpp"

namespace delaysim {

/// Internal invariant breach during a stochastic path (negative count,
/// clock/count mismatch, runaway event count).
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A path failure inside an ensemble, tagged with its replica index.
class EnsembleError : public SimulationError {
public:
    EnsembleError(std::size_t replica, const std::string& what)
        : SimulationError("replica " + std::to_string(replica) + ": " + what), replica_(replica)
    {
    }
    std::size_t replica() const { return replica_; }

private:
    std::size_t replica_;
};

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct SystemState {
    double time = 0.0;
    std::vector<std::int64_t> counts;
};

/// One particle's pending delayed removal.
struct DelayClock {
    double fire_time;
    double entry_time;
};

/// Min-heap of delay clocks for one compartment. Heap slots hold one clock
/// per particle, so a uniform slot index is a uniform particle.
class DelayClockSet {
public:
    std::size_t size() const { return heap_.size(); }
    bool empty() const { return heap_.empty(); }
    const DelayClock& earliest() const { return heap_.front(); }
    const DelayClock& at(std::size_t slot) const { return heap_[slot]; }

    void push(DelayClock clock);
    DelayClock pop_earliest();
    DelayClock remove_at(std::size_t slot);
    void clear() { heap_.clear(); }

private:
    void sift_up(std::size_t i);
    void sift_down(std::size_t i);

    std::vector<DelayClock> heap_;
};

enum class EventKind { markov, delay };

struct EventRecord {
    double time;
    EventKind kind;
    /// Index into ModelSpec::markov or ModelSpec::delays.
    std::size_t process;
    std::optional<std::size_t> source;
    std::optional<std::size_t> target;
    /// Time the removed particle spent in the source compartment; only
    /// recorded for delay firings.
    double dwell = std::numeric_limits<double>::quiet_NaN();
};

struct Trajectory {
    std::vector<double> grid;
    /// Row j holds the counts after the last event at or before grid[j].
    CountMatrix counts_at_grid;
    std::vector<EventRecord> events;
    /// First time each compartment held zero particles; +inf if never.
    std::vector<double> first_zero_time;
    std::size_t event_count = 0;
    SystemState final_state;
};

struct PathOptions {
    bool record_events = false;
    /// Check clock/count agreement after every event.
    bool check_invariants = true;
    std::size_t max_events = std::size_t{1} << 32;
};

/// Exact event-driven simulator for one validated ModelSpec. Holds the
/// per-compartment quantile tables; immutable and shareable across threads.
class PathSimulator {
public:
    explicit PathSimulator(ModelSpec spec);

    const ModelSpec& spec() const { return spec_; }
    Trajectory run(RngStream& rng, const PathOptions& options = {}) const;

private:
    ModelSpec spec_;
    /// Markovian processes grouped by source; the last group is external.
    std::vector<std::vector<std::size_t>> groups_;
    std::vector<std::optional<std::size_t>> delay_of_;
    std::vector<DexpQuantileTable> tables_;
};

Trajectory run_path(const ModelSpec& spec, RngStream& rng, const PathOptions& options = {});

struct EnsembleOptions {
    /// Worker threads; 0 uses the available hardware parallelism.
    std::size_t parallelism = 0;
    /// Compartment whose first hit of zero counts as an extinction.
    std::optional<std::size_t> extinction_compartment;
    /// Number of leading replicas whose trajectories are kept.
    std::size_t keep_paths = 0;
};

struct ExtinctionStats {
    std::size_t compartment;
    std::size_t extinct_paths;
    double fraction;
};

struct EnsembleSummary {
    std::vector<double> grid;
    std::vector<std::string> names;
    std::size_t n_paths = 0;
    /// grid x compartment matrices.
    Eigen::MatrixXd mean;
    Eigen::MatrixXd variance;
    Eigen::MatrixXd std_error;
    std::optional<ExtinctionStats> extinction;
    std::vector<Trajectory> kept_paths;
};

/// Runs replicas r = 0 .. n_paths-1 on RngStream(seed, r) and reduces them in
/// replica order, so the summary does not depend on thread scheduling.
EnsembleSummary run_ensemble(const ModelSpec& spec, std::size_t n_paths, std::uint64_t seed,
                             const EnsembleOptions& options = {});

} // namespace delaysim
