#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sht {

/// Precondition or shape violation in a caller-supplied argument.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite value or failed factorization inside a numeric kernel.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A solver's iterates blew up. Carries the iteration count and the step size
/// that produced it so sweeps can record the failing cell.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::size_t iteration, double step_size)
      : NumericError(what), iteration_(iteration), step_size_(step_size) {}

  std::size_t iteration() const noexcept { return iteration_; }
  double step_size() const noexcept { return step_size_; }

 private:
  std::size_t iteration_;
  double step_size_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}

  /// 1-based line number of the offending input, 0 when not line-oriented.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sht
