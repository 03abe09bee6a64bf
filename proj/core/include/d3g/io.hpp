#pragma once

#include <string>

namespace d3g {

/// Writes content to path through a temporary file and rename, creating
/// parent directories. Throws Error on failure.
void write_file_atomic(const std::string& path, const std::string& content);

/// Whole file as a string. Throws DataError when it cannot be opened.
std::string read_file(const std::string& path);

}  // namespace d3g
