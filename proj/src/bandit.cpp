#include "mfpg/bandit.hpp"

#include "mfpg/errors.hpp"

#include <cmath>

namespace mfpg {

BanditSpec make_bandit(Vector reward, double tau) {
  if (reward.size() < 1) throw ShapeError("bandit needs at least one action");
  if (!reward.allFinite()) throw DomainError("bandit reward must be finite");
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  BanditSpec spec;
  spec.n_a = static_cast<int>(reward.size());
  spec.reward = std::move(reward);
  spec.tau = tau;
  spec.w_a = 1.0 / spec.n_a;
  return spec;
}

BanditOptimum bandit_optimal(const BanditSpec& spec) {
  const double m = spec.reward.maxCoeff();
  Matrix density(1, spec.n_a);
  double z_shifted = 0.0;
  for (int a = 0; a < spec.n_a; ++a) {
    density(0, a) = std::exp((spec.reward[a] - m) / spec.tau);
    z_shifted += spec.w_a * density(0, a);
  }
  density /= z_shifted;
  return {{std::move(density)}, m + spec.tau * std::log(z_shifted)};
}

Vector bandit_residual(const BanditSpec& spec, const Vector& f) {
  if (f.size() != spec.n_a) throw ShapeError("bandit_residual: field size mismatch");
  const double m = f.maxCoeff();
  Vector pi(spec.n_a);
  double z = 0.0;
  for (int a = 0; a < spec.n_a; ++a) {
    pi[a] = std::exp(f[a] - m);
    z += spec.w_a * pi[a];
  }
  pi /= z;
  double value = 0.0;
  for (int a = 0; a < spec.n_a; ++a) value += spec.w_a * pi[a] * (spec.reward[a] - spec.tau * std::log(pi[a]));
  // f enters through its normalized form log pi_f, which absorbs constant shifts.
  Vector out(spec.n_a);
  for (int a = 0; a < spec.n_a; ++a) out[a] = spec.reward[a] - spec.tau * std::log(pi[a]) - value;
  return out;
}

MdpSpec embed_bandit(const BanditSpec& spec) {
  Matrix transition = Matrix::Ones(spec.n_a, 1);
  Matrix reward = spec.reward.transpose();
  MdpSpec mdp = make_mdp(std::move(transition), std::move(reward), 0.0, spec.tau, Vector::Ones(1));
  mdp.point_state = true;
  return mdp;
}

VelocityField bandit_vector_field(const BanditSpec& spec, const Ensemble& ensemble) {
  const MdpSpec mdp = embed_bandit(spec);
  const Matrix f = energy_field(ensemble, mdp);
  const PolicyTable pi = softmax_policy(f, mdp);

  VelocityField field;
  field.per_particle.resize(ensemble.size());
  std::vector<std::array<double, 4>> grads(static_cast<std::size_t>(spec.n_a));
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const Particle& p = ensemble.particles[i];
    std::array<double, 4> mean{};
    for (int a = 0; a < spec.n_a; ++a) {
      const double ac = mdp.action_coord(a);
      const InnerWeights dphi = feature_grad(0.0, ac, p.omega_bar, ensemble.feature);
      grads[a] = {feature(0.0, ac, p.omega_bar, ensemble.feature), p.omega0 * dphi[0], p.omega0 * dphi[1],
                  p.omega0 * dphi[2]};
      for (std::size_t k = 0; k < 4; ++k) mean[k] += spec.w_a * pi.density(0, a) * grads[a][k];
    }
    std::array<double, 4> v{};
    for (int a = 0; a < spec.n_a; ++a) {
      const double g = spec.reward[a] - spec.tau * f(0, a);
      for (std::size_t k = 0; k < 4; ++k) v[k] += spec.w_a * pi.density(0, a) * (grads[a][k] - mean[k]) * g;
    }
    field.per_particle[i] = v;
  }
  return field;
}

}  // namespace mfpg
