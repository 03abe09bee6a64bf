#include "csv.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "d3g/errors.hpp"

namespace d3g::detail {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<Row> read_rows(const std::string& path, char delim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<Row> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    Row row{n, {}};
    if (delim == ' ') {
      std::istringstream ss{std::string(body)};
      std::string tok;
      while (ss >> tok) row.fields.push_back(tok);
    } else {
      std::size_t start = 0;
      while (true) {
        const auto pos = body.find(delim, start);
        row.fields.emplace_back(trim(body.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error("cannot format double");
  return std::string(buf, ptr);
}

double parse_double(std::string_view s, const std::string& source, std::size_t line) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) {
    throw MalformedRowError(source, line, "'" + std::string(s) + "' is not a number");
  }
  return v;
}

std::int64_t parse_int(std::string_view s, const std::string& source, std::size_t line) {
  std::int64_t v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) {
    throw MalformedRowError(source, line,
                            "'" + std::string(s) + "' is not an integer id");
  }
  return v;
}

}  // namespace d3g::detail

namespace d3g {

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace d3g
