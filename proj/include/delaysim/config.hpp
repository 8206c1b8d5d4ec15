#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "delaysim/model.hpp"

namespace delaysim {

/// Malformed or inconsistent configuration input.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model config document:
///
///   {
///     "compartments": ["S", "I"],
///     "markov": [{"label": "infection", "source": "S", "target": "I",
///                 "kind": "mass_action", "coefficient": 0.02,
///                 "operands": ["S", "I"]}, ...],
///     "delays": [{"label": "recovery", "source": "I", "target": "S",
///                 "mu": 1.0, "tau": 0.2}],
///     "initial": {"S": 95, "I": 5},
///     "horizon": 30,
///     "grid": [0, 0.5, ...]          // or {"points": 200}
///   }
///
/// "external" as a source and "sink" as a target denote the outside world.
nlohmann::json model_to_json(const ModelSpec& spec);
ModelSpec model_from_json(const nlohmann::json& doc);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

} // namespace delaysim
