#include "delaysim/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace delaysim {

std::string format_shortest(double value)
{
    std::array<char, 64> buf{};
    const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (result.ec != std::errc())
        throw std::runtime_error("format_shortest: conversion failed");
    return std::string(buf.data(), result.ptr);
}

void write_csv(std::ostream& out, std::span<const std::string> header, std::span<const double> times,
               const Eigen::MatrixXd& columns)
{
    if (static_cast<Eigen::Index>(times.size()) != columns.rows())
        throw std::invalid_argument("write_csv: row count mismatch");
    if (static_cast<Eigen::Index>(header.size()) != columns.cols() + 1)
        throw std::invalid_argument("write_csv: header does not match the column count");
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << header[c];
    out << '\n';
    for (std::size_t r = 0; r < times.size(); ++r) {
        out << format_shortest(times[r]);
        for (Eigen::Index c = 0; c < columns.cols(); ++c)
            out << ',' << format_shortest(columns(static_cast<Eigen::Index>(r), c));
        out << '\n';
    }
}

void write_csv_file(const std::filesystem::path& path, std::span<const std::string> header,
                    std::span<const double> times, const Eigen::MatrixXd& columns)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + path.string() + "'");
    write_csv(out, header, times, columns);
}

} // namespace delaysim
