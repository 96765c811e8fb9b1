#pragma once

#include <stdexcept>
#include <string>

namespace mfpg {

/// Argument outside the mathematical domain of an operation (e.g. a
/// non-positive density handed to a logarithm).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Table dimensions do not agree with the MDP they are used with.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller violated a documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure that should be impossible for valid inputs.
class InternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(int iterations, double residual);

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// Training produced a non-finite energy or velocity.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(long step, const std::string& what);

  long step() const noexcept { return step_; }

 private:
  long step_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mfpg
