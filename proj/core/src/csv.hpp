#pragma once

// Internal helpers for delimiter-separated files.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "d3g/io.hpp"

namespace d3g::detail {

struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Reads a file into rows split on `delim` (whitespace-trimmed fields).
/// Blank lines and lines starting with '#' are skipped. A delimiter of ' '
/// splits on runs of whitespace. Throws DataError when the file cannot be
/// opened.
std::vector<Row> read_rows(const std::string& path, char delim = ',');

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

double parse_double(std::string_view s, const std::string& source, std::size_t line);
std::int64_t parse_int(std::string_view s, const std::string& source, std::size_t line);

using d3g::read_file;
using d3g::write_file_atomic;

}  // namespace d3g::detail
