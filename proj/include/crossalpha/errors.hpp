#pragma once

#include <stdexcept>
#include <string>

namespace crossalpha {

/// Bad configuration or usage: invalid windows, degenerate ranges,
/// unknown config keys. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input data (CSV, expressions). Carries a position where known.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Violated numeric precondition at runtime: non-positive price in a log,
/// zero-dispersion IC series, empty universe. Maps to CLI exit code 1.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace crossalpha
