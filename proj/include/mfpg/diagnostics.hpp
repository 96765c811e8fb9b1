#pragma once

#include "mfpg/bandit.hpp"
#include "mfpg/dynamics.hpp"
#include "mfpg/mdp.hpp"
#include "mfpg/meanfield.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mfpg {

/// Outcome of one numerical check. `pass` is always `measured <= threshold`
/// (NaN measurements fail).
struct CheckReport {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string details;
};

CheckReport make_report(std::string name, double measured, double threshold, std::string details = {});

/// CSV with header `name,pass,measured,threshold,details`.
void write_reports_csv(std::ostream& out, std::span<const CheckReport> reports);

/// delta(s, a) = Q(s, a) - tau log pi(s, a) - V(s).
Matrix residual_delta(const PolicyTable& policy, const QTable& q, const ValueVector& v, double tau);

// Random instances for the checks. All are deterministic in `seed`.
MdpSpec random_mdp(int n_s, int n_a, double gamma, double tau, std::uint64_t seed);
PolicyTable random_policy(const MdpSpec& mdp, std::uint64_t seed, double scale = 1.0);
QTable random_q(const MdpSpec& mdp, std::uint64_t seed, double lo, double hi);
/// Every weight, omega0 included, drawn i.i.d. N(0, sigma2).
Ensemble random_ensemble(int n, std::uint64_t seed, double sigma2, FeatureConfig cfg);

/// Largest relative gap between the transport field and N times a central
/// difference of the energy, over every particle coordinate. The gap is
/// |v - fd| / max(|v|, |fd|, 1e-4), so components below 1e-4 are compared
/// with absolute tolerance 1e-8. Requires tanh features.
CheckReport check_gradient(const MdpSpec& mdp, const Ensemble& ensemble, double h);

/// Same comparison, keeping per coordinate the best of several steps `hs`.
CheckReport check_gradient_sweep(const MdpSpec& mdp, const Ensemble& ensemble, std::span<const double> hs);

/// |T Q1 - T Q2|_inf / |Q1 - Q2|_inf, or 0 when Q1 = Q2.
double contraction_ratio(const MdpSpec& mdp, const QTable& q1, const QTable& q2);

/// max over random pairs of |T Q1 - T Q2|_inf / |Q1 - Q2|_inf against gamma + 1e-12.
CheckReport check_contraction(const MdpSpec& mdp, int trials, std::uint64_t seed);

/// Shift invariance (a constant-feature particle with two different output
/// weights) and omega0-homogeneity of the field at a frozen policy.
std::vector<CheckReport> check_invariances(const MdpSpec& mdp, const Ensemble& ensemble);

/// particle_velocity on the embedded bandit versus the direct bandit field.
CheckReport check_bandit_equivalence(const BanditSpec& spec, const Ensemble& ensemble);

/// Boltzmann residual of soft value iteration at `tol`.
CheckReport check_soft_oracle(const MdpSpec& mdp, double tol);

/// Installs the reward that makes `target` soft-optimal, re-solves, and
/// measures |Q' - target|_inf.
CheckReport check_inversion_roundtrip(const MdpSpec& skeleton, const QTable& target, double tol, double threshold);

/// Total occupancy mass against 1/(1 - gamma).
CheckReport check_occupancy_mass(const MdpSpec& mdp, const PolicyTable& policy);

/// Occupancy against the truncated series Sum_{t < terms} gamma^t (P_pi^T)^t rho0.
CheckReport check_occupancy_series(const MdpSpec& mdp, const PolicyTable& policy, int terms, double threshold);

/// Error may rise by at most 1e-9 max(1, |E|) between consecutive records.
CheckReport check_monotone_error(std::span<const TrainRecord> records, const std::string& name);

/// final error / initial error against `max_ratio`.
CheckReport check_error_reduction(std::span<const TrainRecord> records, double max_ratio, const std::string& name);

/// RMS velocity (<= 1e-8) and parameter drift over `steps` Euler steps
/// (<= 1e-6) for an ensemble that already represents the optimal policy.
std::vector<CheckReport> check_fixed_point(const MdpSpec& mdp, const Ensemble& optimal, long steps, double beta);

struct ChaosOptions {
  double sigma2 = 4.0;
  FeatureConfig feature;
};

struct ChaosStudy {
  std::vector<int> widths;
  /// Sup-norm distance of final energy fields to the reference run, averaged over seeds.
  std::vector<double> discrepancies;
  int reference_width = 0;

  /// d[k+1] <= (1 + slack) d[k] for every consecutive pair.
  bool nonincreasing(double slack) const;
};

/// Trains width-N ensembles and a reference of width 8 max(widths) from the
/// same initial law (independent draws per seed) and compares final fields.
ChaosStudy chaos_study(const MdpSpec& mdp, std::span<const int> widths, std::span<const std::uint64_t> seeds,
                       long steps, double beta, const ChaosOptions& options = {});

/// Sup-norm distance between the energy fields of two ensembles after
/// training each for `steps`.
double field_discrepancy(const MdpSpec& mdp, const Ensemble& a, const Ensemble& b, long steps, double beta);

}  // namespace mfpg
