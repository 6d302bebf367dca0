#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace corrnet3d {

/// Incompatible tensor or cloud shapes.
class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// NaN / non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

class GeometryError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed point-cloud or CSV input. `line()` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class CheckpointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace corrnet3d
