#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scenefuse {

// Base for every failure raised by the library. Validation findings are
// returned as data (see Violation / Diagnostic), not thrown.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A line-oriented input could not be parsed.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// One finding from a lenient parser, carrying a 1-based line number.
struct Diagnostic {
  std::size_t line = 0;
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

std::string to_string(const Diagnostic& d);

}  // namespace scenefuse
