#pragma once

#include "mfpg/dynamics.hpp"
#include "mfpg/mdp.hpp"
#include "mfpg/meanfield.hpp"

namespace mfpg {

/// Single-state problem on A = [0, 1] with reward r(a) sampled at cell centers.
struct BanditSpec {
  int n_a = 1;
  Vector reward;
  double tau = 1.0;
  double w_a = 1.0;
};

BanditSpec make_bandit(Vector reward, double tau);

struct BanditOptimum {
  PolicyTable policy;  // 1 x n_a
  double value = 0.0;  // tau log Z
};

/// pi*(a) = exp(r(a)/tau) / Z with Z = Sum_a w_a exp(r(a)/tau).
BanditOptimum bandit_optimal(const BanditSpec& spec);

/// r(a) - tau log pi_f(a) - V_f, where pi_f = softmax(f) and V_f is its regularized value.
/// Vanishes exactly when f = r/tau + const on the grid.
Vector bandit_residual(const BanditSpec& spec, const Vector& f);

/// The bandit as an MDP with one state (at s = 0), gamma = 0 and rho0 = 1.
MdpSpec embed_bandit(const BanditSpec& spec);

/// Bandit transport field evaluated directly,
///   Sum_a w_a pi(a) (grad psi(a) - E_pi grad psi) (r(a) - tau f(a)).
VelocityField bandit_vector_field(const BanditSpec& spec, const Ensemble& ensemble);

}  // namespace mfpg
