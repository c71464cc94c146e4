#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fxgp {

/// Bad configuration or command usage (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Syntax or structural error in serialized strategy text. `position` is a
/// zero-based character offset into the parsed text.
class ParseError : public DataError {
 public:
  ParseError(std::size_t position, const std::string& message)
      : DataError("at position " + std::to_string(position) + ": " + message),
        position_(position),
        detail_(message) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t position_;
  std::string detail_;
};

/// An internal invariant did not hold (CLI exit code 3).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace fxgp
