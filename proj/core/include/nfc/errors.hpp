#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nfc {

// Invalid physical or numerical argument (negative radius, NA > 1, zero denominator, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed file whose content violates the data model (non-monotone time axis, empty data, ...).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative computation hit its cap. The last two iterates are kept so callers can judge how far off it was.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double previous, double last)
      : std::runtime_error(what + " (last iterates " + std::to_string(previous) + ", " +
                           std::to_string(last) + ")"),
        previous_(previous),
        last_(last) {}
  double previous() const noexcept { return previous_; }
  double last() const noexcept { return last_; }

 private:
  double previous_;
  double last_;
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nfc
