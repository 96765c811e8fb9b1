#include "mfpg/mdp.hpp"

#include "mfpg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mfpg {

namespace {

void require_policy_shape(const PolicyTable& policy, const MdpSpec& mdp) {
  if (policy.density.rows() != mdp.n_s || policy.density.cols() != mdp.n_a) {
    throw ShapeError("policy is " + std::to_string(policy.density.rows()) + "x" +
                     std::to_string(policy.density.cols()) + ", MDP grid is " + std::to_string(mdp.n_s) +
                     "x" + std::to_string(mdp.n_a));
  }
}

void require_q_shape(const QTable& q, const MdpSpec& mdp) {
  if (q.values.rows() != mdp.n_s || q.values.cols() != mdp.n_a) {
    throw ShapeError("Q table does not match the MDP grid");
  }
}

void require_finite(const Eigen::Ref<const Vector>& v, const char* what) {
  if (!v.allFinite()) throw InternalError(std::string(what) + ": linear solve produced non-finite values");
}

// Per-state soft maximum tau log Sum_a w exp(q/tau).
double soft_max_row(const double* q, int n_a, double w_a, double tau) {
  const double m = *std::max_element(q, q + n_a);
  double acc = 0.0;
  for (int a = 0; a < n_a; ++a) acc += w_a * std::exp((q[a] - m) / tau);
  return m + tau * std::log(acc);
}

}  // namespace

void MdpSpec::validate() const {
  if (n_s < 1 || n_a < 1) throw ShapeError("grid sizes must be positive");
  if (transition.rows() != static_cast<Eigen::Index>(n_s) * n_a || transition.cols() != n_s) {
    throw ShapeError("transition must be (n_s*n_a) x n_s");
  }
  if (mean_reward.rows() != n_s || mean_reward.cols() != n_a) throw ShapeError("mean_reward must be n_s x n_a");
  if (rho0.size() != n_s) throw ShapeError("rho0 must have n_s entries");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in [0, 1)");
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  if (!(action_weight > 0.0)) throw DomainError("action_weight must be positive");
  if (!mean_reward.allFinite()) throw DomainError("mean_reward must be finite");
  for (Eigen::Index row = 0; row < transition.rows(); ++row) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < n_s; ++k) {
      const double p = transition(row, k);
      if (!(p >= 0.0)) throw DomainError("transition probabilities must be nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw DomainError("transition row does not sum to 1");
  }
  double mass = 0.0;
  for (Eigen::Index k = 0; k < n_s; ++k) {
    if (!(rho0[k] >= 0.0)) throw DomainError("rho0 must be nonnegative");
    mass += rho0[k];
  }
  if (std::abs(mass - 1.0) > 1e-12) throw DomainError("rho0 does not sum to 1");
}

MdpSpec make_mdp(Matrix transition, Matrix mean_reward, double gamma, double tau, Vector rho0) {
  MdpSpec mdp;
  mdp.n_s = static_cast<int>(mean_reward.rows());
  mdp.n_a = static_cast<int>(mean_reward.cols());
  mdp.transition = std::move(transition);
  mdp.mean_reward = std::move(mean_reward);
  mdp.gamma = gamma;
  mdp.tau = tau;
  mdp.rho0 = std::move(rho0);
  mdp.action_weight = mdp.n_a > 0 ? 1.0 / mdp.n_a : 0.0;
  mdp.validate();
  return mdp;
}

Vector uniform_distribution(int n) { return Vector::Constant(n, 1.0 / n); }

PolicyTable uniform_policy(const MdpSpec& mdp) { return {Matrix::Ones(mdp.n_s, mdp.n_a)}; }

double kl_to_reference(std::span<const double> density, double w_a) {
  double kl = 0.0;
  for (double p : density) {
    if (!(p > 0.0)) throw DomainError("kl_to_reference: density entries must be positive");
    kl += w_a * p * std::log(p);
  }
  return kl;
}

Matrix expected_next(const MdpSpec& mdp, const Vector& v) {
  const Vector flat = mdp.transition * v;
  return Eigen::Map<const Matrix>(flat.data(), mdp.n_s, mdp.n_a);
}

Matrix policy_transition(const PolicyTable& policy, const MdpSpec& mdp) {
  require_policy_shape(policy, mdp);
  Matrix p_pi = Matrix::Zero(mdp.n_s, mdp.n_s);
  for (int s = 0; s < mdp.n_s; ++s) {
    for (int a = 0; a < mdp.n_a; ++a) {
      p_pi.row(s) += (mdp.action_weight * policy.density(s, a)) * mdp.transition.row(s * mdp.n_a + a);
    }
  }
  return p_pi;
}

OccupancyVector occupancy(const PolicyTable& policy, const MdpSpec& mdp) {
  const Matrix p_pi = policy_transition(policy, mdp);
  const Matrix lhs = Matrix::Identity(mdp.n_s, mdp.n_s) - mdp.gamma * p_pi.transpose();
  Vector rho = lhs.partialPivLu().solve(mdp.rho0);
  require_finite(rho, "occupancy");
  return {std::move(rho)};
}

PolicyEvaluation evaluate_policy(const PolicyTable& policy, const MdpSpec& mdp) {
  const Matrix p_pi = policy_transition(policy, mdp);
  Vector reward(mdp.n_s);
  for (int s = 0; s < mdp.n_s; ++s) {
    const std::span<const double> row(policy.density.row(s).data(), static_cast<std::size_t>(mdp.n_a));
    double expected = 0.0;
    for (int a = 0; a < mdp.n_a; ++a) expected += mdp.action_weight * row[a] * mdp.mean_reward(s, a);
    reward[s] = expected - mdp.tau * kl_to_reference(row, mdp.action_weight);
  }
  const Matrix lhs = Matrix::Identity(mdp.n_s, mdp.n_s) - mdp.gamma * p_pi;
  Vector v = lhs.partialPivLu().solve(reward);
  require_finite(v, "evaluate_policy");
  Matrix q = mdp.mean_reward + mdp.gamma * expected_next(mdp, v);
  return {{std::move(v)}, {std::move(q)}};
}

ValueVector soft_state_value(const QTable& q, const MdpSpec& mdp) {
  require_q_shape(q, mdp);
  Vector v(mdp.n_s);
  for (int s = 0; s < mdp.n_s; ++s) v[s] = soft_max_row(q.values.row(s).data(), mdp.n_a, mdp.action_weight, mdp.tau);
  return {std::move(v)};
}

QTable soft_bellman_backup(const QTable& q, const MdpSpec& mdp) {
  const ValueVector v = soft_state_value(q, mdp);
  return {mdp.mean_reward + mdp.gamma * expected_next(mdp, v.values)};
}

PolicyTable boltzmann_policy(const QTable& q, const MdpSpec& mdp) {
  const ValueVector v = soft_state_value(q, mdp);
  Matrix density(mdp.n_s, mdp.n_a);
  for (int s = 0; s < mdp.n_s; ++s) {
    for (int a = 0; a < mdp.n_a; ++a) density(s, a) = std::exp((q.values(s, a) - v.values[s]) / mdp.tau);
  }
  return {std::move(density)};
}

SoftOptimum soft_value_iteration(const MdpSpec& mdp, double tol, int max_iter) {
  if (!(tol > 0.0)) throw PreconditionError("soft_value_iteration: tol must be positive");
  QTable q{Matrix::Zero(mdp.n_s, mdp.n_a)};
  double change = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    QTable next = soft_bellman_backup(q, mdp);
    change = (next.values - q.values).cwiseAbs().maxCoeff();
    q = std::move(next);
    if (change <= tol) {
      SoftOptimum out;
      out.policy = boltzmann_policy(q, mdp);
      out.value = soft_state_value(q, mdp);
      out.q = std::move(q);
      out.iterations = it;
      out.last_change = change;
      return out;
    }
  }
  throw NonConvergenceError(max_iter, change);
}

Matrix invert_soft_bellman(const QTable& q_star, const MdpSpec& skeleton) {
  const ValueVector v = soft_state_value(q_star, skeleton);
  return q_star.values - skeleton.gamma * expected_next(skeleton, v.values);
}

double energy(const PolicyTable& policy, const MdpSpec& mdp) {
  return mdp.rho0.dot(evaluate_policy(policy, mdp).value.values);
}

}  // namespace mfpg
