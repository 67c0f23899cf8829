#pragma once

#include <stdexcept>
#include <string>

namespace crskit {

/// Base class for every error raised by the library. The CLI maps these to
/// exit code 1 (validation error).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Box with zero or negative extent, or non-finite coordinates.
class InvalidGeometry : public Error {
 public:
  using Error::Error;
};

/// Out-of-range parameter or malformed configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Exact solver asked to enumerate more regions than its cap allows.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class FeatureDimensionError : public Error {
 public:
  using Error::Error;
};

/// Schema or syntax violation while reading a file. `line` is 1-based, 0 when
/// the error is not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what);

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace crskit
