#include "crskit/errors.hpp"

namespace crskit {

namespace {

std::string format_parse_error(std::size_t line, const std::string& field, const std::string& what) {
  std::string msg;
  if (line > 0) msg += "line " + std::to_string(line) + ": ";
  if (!field.empty()) msg += field + ": ";
  return msg + what;
}

}  // namespace

ParseError::ParseError(std::size_t line, std::string field, const std::string& what)
    : Error(format_parse_error(line, field, what)), line_(line), field_(std::move(field)) {}

}  // namespace crskit
