#pragma once

#include <stdexcept>
#include <string>

namespace d3g {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, shapes, or configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent dataset, meta-data, split, or adjacency input.
class DataError : public Error {
 public:
  using Error::Error;
};

class MissingMetaError : public DataError {
 public:
  explicit MissingMetaError(long long domain)
      : DataError("missing meta-data for domain " + std::to_string(domain)),
        domain_(domain) {}
  long long domain() const noexcept { return domain_; }

 private:
  long long domain_;
};

class OverlappingSplitError : public DataError {
 public:
  explicit OverlappingSplitError(long long domain)
      : DataError("overlapping splits: domain " + std::to_string(domain) +
                  " is assigned to more than one split"),
        domain_(domain) {}
  long long domain() const noexcept { return domain_; }

 private:
  long long domain_;
};

class MalformedRowError : public DataError {
 public:
  MalformedRowError(const std::string& source, std::size_t line,
                    const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Non-finite loss or gradient encountered during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace d3g
