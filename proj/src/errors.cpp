#include "mfpg/errors.hpp"

#include <cstdio>

namespace mfpg {

namespace {

std::string format_nonconvergence(int iterations, double residual) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "no convergence after %d iterations (last residual %.3e)", iterations,
                residual);
  return buf;
}

}  // namespace

NonConvergenceError::NonConvergenceError(int iterations, double residual)
    : std::runtime_error(format_nonconvergence(iterations, residual)),
      iterations_(iterations),
      residual_(residual) {}

DivergenceError::DivergenceError(long step, const std::string& what)
    : std::runtime_error("divergence at step " + std::to_string(step) + ": " + what), step_(step) {}

}  // namespace mfpg
