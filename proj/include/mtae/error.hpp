#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtae {

/// Coarse failure classes. The CLI prints the category name as a stable,
/// machine-parseable prefix on stderr.
enum class ErrorCategory {
  parse,
  range,
  io,
  config,
  shape,
  state,
};

std::string_view category_name(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Parse failure tied to a 1-based input line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorCategory::parse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mtae
