#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tlab {

// Bad input: malformed records, broken invariants, out-of-range parameters.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure while doing work on valid input (solver non-convergence, I/O,
// provider outages). The CLI maps this to exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : ValidationError(what + " (line " + std::to_string(line) + ", column " +
                        std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace tlab
