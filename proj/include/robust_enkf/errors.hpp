#pragma once

#include <stdexcept>
#include <string>

namespace robust_enkf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument (bad sizes, ensemble too small, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Symmetric factorization of a matrix that should be positive definite failed.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

/// A model or filter produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A linear solve failed even after regularization.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function (e.g. sigma <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Error raised while stepping a filter; carries the time index and, when
/// raised through the Monte Carlo harness, the run index.
class StepError : public Error {
 public:
  StepError(const std::string& what, std::size_t step, long run = -1)
      : Error(what), step_(step), run_(run) {}

  std::size_t step() const noexcept { return step_; }
  long run() const noexcept { return run_; }

 private:
  std::size_t step_;
  long run_;
};

}  // namespace robust_enkf
