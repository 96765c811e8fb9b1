#include "mfpg/dynamics.hpp"

#include "mfpg/errors.hpp"
#include "mfpg/parallel.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace mfpg {

double VelocityField::rms() const {
  if (per_particle.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& v : per_particle) {
    for (double c : v) acc += c * c;
  }
  return std::sqrt(acc / static_cast<double>(per_particle.size()));
}

bool VelocityField::all_finite() const {
  for (const auto& v : per_particle) {
    for (double c : v) {
      if (!std::isfinite(c)) return false;
    }
  }
  return true;
}

double covariance_row(std::span<const double> f, std::span<const double> g, std::span<const double> policy_row,
                      double w_a) {
  double ef = 0.0, eg = 0.0, efg = 0.0;
  for (std::size_t a = 0; a < policy_row.size(); ++a) {
    const double p = w_a * policy_row[a];
    ef += p * f[a];
    eg += p * g[a];
    efg += p * f[a] * g[a];
  }
  return efg - ef * eg;
}

kernels::CellWeights transport_weights(const PolicyTable& policy, const QTable& q, const OccupancyVector& rho,
                                       const MdpSpec& mdp) {
  if (policy.density.rows() != mdp.n_s || policy.density.cols() != mdp.n_a || q.values.rows() != mdp.n_s ||
      q.values.cols() != mdp.n_a || rho.mass.size() != mdp.n_s) {
    throw ShapeError("particle_velocity: tables do not match the MDP grid");
  }
  const std::size_t m = static_cast<std::size_t>(mdp.n_s) * static_cast<std::size_t>(mdp.n_a);
  kernels::CellWeights cells;
  cells.s.resize(m);
  cells.a.resize(m);
  cells.weight.resize(m);
  cells.weight_s.resize(m);
  cells.weight_a.resize(m);

  std::vector<double> advantage(static_cast<std::size_t>(mdp.n_a));
  for (int s = 0; s < mdp.n_s; ++s) {
    // Centering by E_pi[g] uses the identity Sum p (grad - E grad) g = Sum p grad (g - E g).
    double mean = 0.0;
    for (int a = 0; a < mdp.n_a; ++a) {
      const double pi = policy.density(s, a);
      if (!(pi > 0.0)) throw DomainError("particle_velocity: policy density must be positive");
      advantage[a] = q.values(s, a) - mdp.tau * std::log(pi);
      mean += mdp.action_weight * pi * advantage[a];
    }
    const double sc = mdp.state_coord(s);
    for (int a = 0; a < mdp.n_a; ++a) {
      const std::size_t c = static_cast<std::size_t>(s) * mdp.n_a + a;
      const double ac = mdp.action_coord(a);
      const double w = rho.mass[s] * (mdp.action_weight * policy.density(s, a)) * (advantage[a] - mean);
      cells.s[c] = sc;
      cells.a[c] = ac;
      cells.weight[c] = w;
      cells.weight_s[c] = w * sc;
      cells.weight_a[c] = w * ac;
    }
  }
  return cells;
}

VelocityField velocity_in_field(std::span<const Particle> particles, const FeatureConfig& cfg,
                                const kernels::CellWeights& cells) {
  VelocityField field;
  const std::size_t n = particles.size();
  field.per_particle.resize(n);
  std::span<double> out(field.per_particle.empty() ? nullptr : field.per_particle.front().data(), 4 * n);

  if (cfg.kind == FeatureKind::relu) {
    const kernels::ParticleColumns cols = to_columns(std::vector<Particle>(particles.begin(), particles.end()));
    const kernels::Backend backend = kernels::default_backend();
    // Chunks are multiples of 4 so SIMD lanes stay full.
    const std::size_t per_chunk = ((std::max<std::size_t>(4, 100000 / std::max<std::size_t>(1, cells.size())) + 3) / 4) * 4;
    const std::size_t chunks = (n + per_chunk - 1) / per_chunk;
    parallel_for(chunks, 1, [&](std::size_t begin, std::size_t end) {
      kernels::relu_velocity(backend, cols, cells, begin * per_chunk, std::min(n, end * per_chunk), out);
    });
    return field;
  }

  const std::size_t m = cells.size();
  for (std::size_t i = 0; i < n; ++i) {
    const InnerWeights& w = particles[i].omega_bar;
    double acc_phi = 0.0, acc_s = 0.0, acc_a = 0.0, acc_b = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double t = std::tanh((w[0] * cells.s[c] + w[1] * cells.a[c]) + w[2]);
      const double slope = 1.0 - t * t;
      acc_phi = acc_phi + cells.weight[c] * t;
      acc_s = acc_s + cells.weight_s[c] * slope;
      acc_a = acc_a + cells.weight_a[c] * slope;
      acc_b = acc_b + cells.weight[c] * slope;
    }
    const double w0 = particles[i].omega0;
    field.per_particle[i] = {acc_phi, w0 * acc_s, w0 * acc_a, w0 * acc_b};
  }
  return field;
}

VelocityField particle_velocity(const Ensemble& ensemble, const PolicyTable& policy, const QTable& q,
                                const OccupancyVector& rho, const MdpSpec& mdp) {
  const kernels::CellWeights cells = transport_weights(policy, q, rho, mdp);
  return velocity_in_field(ensemble.particles, ensemble.feature, cells);
}

Ensemble euler_step(const Ensemble& ensemble, const VelocityField& velocity, double beta) {
  if (!(beta >= 0.0)) throw PreconditionError("euler_step: beta must be nonnegative");
  if (velocity.per_particle.size() != ensemble.size()) throw ShapeError("euler_step: velocity size mismatch");
  Ensemble next = ensemble;
  for (std::size_t i = 0; i < next.size(); ++i) {
    const auto& v = velocity.per_particle[i];
    Particle& p = next.particles[i];
    p.omega0 += beta * v[0];
    for (std::size_t k = 0; k < 3; ++k) p.omega_bar[k] += beta * v[k + 1];
  }
  return next;
}

EnsembleState evaluate_ensemble(const Ensemble& ensemble, const MdpSpec& mdp) {
  EnsembleState st;
  st.field = energy_field(ensemble, mdp);
  st.policy = softmax_policy(st.field, mdp);
  st.evaluation = evaluate_policy(st.policy, mdp);
  st.rho = occupancy(st.policy, mdp);
  st.energy = mdp.rho0.dot(st.evaluation.value.values);
  return st;
}

double residual_sup(const EnsembleState& state, double tau) {
  double worst = 0.0;
  const Matrix& q = state.evaluation.q.values;
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    for (Eigen::Index a = 0; a < q.cols(); ++a) {
      const double d = q(s, a) - tau * std::log(state.policy.density(s, a)) - state.evaluation.value.values[s];
      worst = std::max(worst, std::abs(d));
    }
  }
  return worst;
}

TrainResult train(const MdpSpec& mdp, Ensemble ensemble0, long steps, double beta, long record_every,
                  double oracle_energy, const TrainOptions& options) {
  if (steps < 0) throw PreconditionError("train: steps must be nonnegative");
  if (!(beta > 0.0)) throw PreconditionError("train: beta must be positive");
  if (record_every < 1) throw PreconditionError("train: record_every must be at least 1");

  using Clock = std::chrono::steady_clock;
  const Clock::time_point start = Clock::now();

  TrainResult result;
  result.ensemble = std::move(ensemble0);
  for (long step = 0;; ++step) {
    EnsembleState st;
    try {
      st = evaluate_ensemble(result.ensemble, mdp);
    } catch (const DomainError& e) {
      // Non-finite or underflowed fields surface as invalid densities.
      throw DivergenceError(step, e.what());
    }
    if (!std::isfinite(st.energy)) throw DivergenceError(step, "non-finite energy");
    const VelocityField v = particle_velocity(result.ensemble, st.policy, st.evaluation.q, st.rho, mdp);
    if (!v.all_finite()) throw DivergenceError(step, "non-finite velocity");

    if (step % record_every == 0 || step == steps) {
      TrainRecord rec;
      rec.step = step;
      rec.energy = st.energy;
      rec.error = oracle_energy - st.energy;
      rec.residual_sup = residual_sup(st, mdp.tau);
      rec.grad_norm = v.rms();
      if (options.measure_time) {
        rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      }
      result.records.push_back(rec);
    }
    if (step == steps) break;
    result.ensemble = euler_step(result.ensemble, v, beta);
    if (options.on_step) options.on_step(step + 1, result.ensemble);
  }
  return result;
}

void write_records_csv(std::ostream& out, std::span<const TrainRecord> records) {
  out << "step,energy,error,residual_sup,grad_norm,wall_ms\n";
  char line[256];
  for (const TrainRecord& r : records) {
    std::snprintf(line, sizeof line, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.energy, r.error,
                  r.residual_sup, r.grad_norm, r.wall_ms);
    out << line;
  }
}

}  // namespace mfpg
