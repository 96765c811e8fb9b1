#pragma once

#include <Eigen/Dense>

#include <span>

namespace mfpg {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Entropy-regularized MDP discretized on uniform grids over S = A = [0, 1].
///
/// States and actions are identified with cell centers (i + 1/2)/n. Action
/// integrals are midpoint quadrature with weight `action_weight` = 1/n_a, so
/// policies are stored as densities with respect to Lebesgue measure on A.
struct MdpSpec {
  int n_s = 1;
  int n_a = 1;
  /// (n_s * n_a) x n_s; row s * n_a + a holds P(s, a, .).
  Matrix transition;
  /// n_s x n_a expected one-step reward.
  Matrix mean_reward;
  double gamma = 0.0;
  double tau = 1.0;
  Vector rho0;
  double action_weight = 1.0;
  /// Single-state problems embedded from a bandit live at s = 0 instead of the
  /// cell center 1/2.
  bool point_state = false;

  double state_coord(int i) const noexcept { return point_state ? 0.0 : (i + 0.5) / n_s; }
  double action_coord(int j) const noexcept { return (j + 0.5) / n_a; }

  /// Throws ShapeError / DomainError when an invariant is violated.
  void validate() const;
};

/// Builds and validates an MdpSpec with action_weight = 1/n_a.
MdpSpec make_mdp(Matrix transition, Matrix mean_reward, double gamma, double tau, Vector rho0);

Vector uniform_distribution(int n);

struct PolicyTable {
  Matrix density;
};

struct QTable {
  Matrix values;
};

struct ValueVector {
  Vector values;
};

struct OccupancyVector {
  Vector mass;
};

struct PolicyEvaluation {
  ValueVector value;
  QTable q;
};

struct SoftOptimum {
  QTable q;
  PolicyTable policy;
  ValueVector value;
  int iterations = 0;
  /// Sup-norm change of the final sweep.
  double last_change = 0.0;
};

PolicyTable uniform_policy(const MdpSpec& mdp);

/// Sum_a w_a pi(a) log pi(a): KL divergence from Lebesgue measure on [0, 1].
double kl_to_reference(std::span<const double> density, double w_a);

/// n_s x n_s matrix P_pi(s, s') = Sum_a w_a pi(s, a) P(s, a, s').
Matrix policy_transition(const PolicyTable& policy, const MdpSpec& mdp);

/// Discounted state occupancy rho = (I - gamma P_pi^T)^{-1} rho0, total mass 1/(1 - gamma).
OccupancyVector occupancy(const PolicyTable& policy, const MdpSpec& mdp);

/// Exact V_pi and Q_pi by a dense linear solve of V = R_pi + gamma P_pi V.
PolicyEvaluation evaluate_policy(const PolicyTable& policy, const MdpSpec& mdp);

/// V_Q(s) = tau log Sum_a w_a exp(Q(s, a)/tau), max-shifted.
ValueVector soft_state_value(const QTable& q, const MdpSpec& mdp);

/// (T Q)(s, a) = r(s, a) + gamma Sum_s' P(s, a, s') V_Q(s').
QTable soft_bellman_backup(const QTable& q, const MdpSpec& mdp);

/// pi_B(s, a) = exp((Q(s, a) - V_Q(s)) / tau).
PolicyTable boltzmann_policy(const QTable& q, const MdpSpec& mdp);

/// Iterates the soft Bellman backup from Q = 0 until the sup-norm change is at
/// most `tol`. Throws NonConvergenceError after `max_iter` sweeps.
SoftOptimum soft_value_iteration(const MdpSpec& mdp, double tol, int max_iter);

/// Reward for which `q_star` is the exact fixed point of the soft backup on the
/// dynamics of `skeleton` (its mean_reward is ignored).
Matrix invert_soft_bellman(const QTable& q_star, const MdpSpec& skeleton);

/// Expected value of the policy under rho0.
double energy(const PolicyTable& policy, const MdpSpec& mdp);

/// n_s x n_a table Sum_s' P(s, a, s') v(s').
Matrix expected_next(const MdpSpec& mdp, const Vector& v);

}  // namespace mfpg
