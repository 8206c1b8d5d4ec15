#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "delaysim/model.hpp"

namespace delaysim::cli {

enum class Mode { stochastic, deterministic, both };

struct RunConfig {
    ModelSpec model;
    Mode mode = Mode::both;
    std::size_t n_paths = 2000;
    std::uint64_t seed = 1;
    double step = 1e-3;
    std::filesystem::path output = ".";
    std::size_t parallelism = 0;
    std::size_t save_paths = 0;
    std::optional<std::size_t> extinction_compartment;
};

/// Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kInvalidConfig = 1;
inline constexpr int kRuntimeFailure = 2;

/// Writes deterministic.csv, ensemble.csv and path_<r>.csv into
/// config.output according to the mode.
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Entry point shared by the executable and the tests; `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace delaysim::cli
