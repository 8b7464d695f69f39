#pragma once

#include <stdexcept>
#include <string>

namespace fenplan {

// Root of every error the library throws. The CLI maps subclasses onto exit
// codes (see exit_code_for).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents or configuration values.
class FormatError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public Error {
 public:
  using Error::Error;
};

// Invalid arguments: bad subsets, out-of-range indices, violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double best_estimate)
      : NumericError(what), best_estimate_(best_estimate) {}

  double best_estimate() const noexcept { return best_estimate_; }

 private:
  double best_estimate_;
};

// No topology satisfies the constraint set. what() lists the nearest misses.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// 0 success, 1 input/IO error, 2 infeasible plan, 3 numeric failure.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace fenplan
