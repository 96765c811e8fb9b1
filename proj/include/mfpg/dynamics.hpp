#pragma once

#include "mfpg/kernels.hpp"
#include "mfpg/mdp.hpp"
#include "mfpg/meanfield.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace mfpg {

/// d omega / dt per particle, ordered (omega0, w_s, w_a, b).
struct VelocityField {
  std::vector<std::array<double, 4>> per_particle;

  /// sqrt((1/N) Sum_i |v_i|^2).
  double rms() const;
  bool all_finite() const;
};

struct TrainRecord {
  long step = 0;
  double energy = 0.0;
  double error = 0.0;
  double residual_sup = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

/// E_pi[f g] - E_pi[f] E_pi[g] with E_pi[h] = Sum_a w_a pi(a) h(a).
double covariance_row(std::span<const double> f, std::span<const double> g, std::span<const double> policy_row,
                      double w_a);

/// Everything the transport field needs from the current policy, computed once
/// per step and shared by all particles.
kernels::CellWeights transport_weights(const PolicyTable& policy, const QTable& q, const OccupancyVector& rho,
                                       const MdpSpec& mdp);

/// Velocity of arbitrary probe particles in a frozen field.
VelocityField velocity_in_field(std::span<const Particle> particles, const FeatureConfig& cfg,
                                const kernels::CellWeights& cells);

/// Mean-field policy-gradient field
///   v_i = Sum_s rho(s) Sum_a w_a pi(s,a) (grad psi_i - E_pi grad psi_i) (Q - tau log pi),
/// in time units where one unit of t moves each particle by N times the raw
/// gradient of the energy.
VelocityField particle_velocity(const Ensemble& ensemble, const PolicyTable& policy, const QTable& q,
                                const OccupancyVector& rho, const MdpSpec& mdp);

/// omega_i += beta * v_i.
Ensemble euler_step(const Ensemble& ensemble, const VelocityField& velocity, double beta);

/// Policy, exact evaluation and occupancy induced by an ensemble.
struct EnsembleState {
  Matrix field;
  PolicyTable policy;
  PolicyEvaluation evaluation;
  OccupancyVector rho;
  double energy = 0.0;
};

EnsembleState evaluate_ensemble(const Ensemble& ensemble, const MdpSpec& mdp);

/// Sup norm of Q - tau log pi - V over the grid.
double residual_sup(const EnsembleState& state, double tau);

struct TrainOptions {
  /// Fill TrainRecord::wall_ms from a steady clock; otherwise it stays 0 so
  /// that outputs are reproducible byte for byte.
  bool measure_time = false;
  /// Called after each completed update with the new step count.
  std::function<void(long, const Ensemble&)> on_step;
};

struct TrainResult {
  Ensemble ensemble;
  std::vector<TrainRecord> records;
};

/// Explicit Euler integration of the exact-expectation dynamics. Records are
/// taken at step 0, every `record_every` steps and at the final step.
/// Throws DivergenceError on a non-finite energy or velocity.
TrainResult train(const MdpSpec& mdp, Ensemble ensemble0, long steps, double beta, long record_every,
                  double oracle_energy, const TrainOptions& options = {});

/// CSV with header `step,energy,error,residual_sup,grad_norm,wall_ms`.
void write_records_csv(std::ostream& out, std::span<const TrainRecord> records);

}  // namespace mfpg
