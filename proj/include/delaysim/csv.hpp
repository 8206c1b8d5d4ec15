#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace delaysim {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_shortest(double value);

/// Writes a header row and then one row per entry of `times`, followed by
/// the matching row of `columns`.
void write_csv(std::ostream& out, std::span<const std::string> header, std::span<const double> times,
               const Eigen::MatrixXd& columns);

void write_csv_file(const std::filesystem::path& path, std::span<const std::string> header,
                    std::span<const double> times, const Eigen::MatrixXd& columns);

} // namespace delaysim
