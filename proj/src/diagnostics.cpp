#include "mfpg/diagnostics.hpp"

#include "mfpg/errors.hpp"
#include "mfpg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace mfpg {

namespace {

std::string fmt(const char* format, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, format, a, b);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double ensemble_energy(const Ensemble& e, const MdpSpec& mdp) {
  return energy(softmax_policy(energy_field(e, mdp), mdp), mdp);
}

double& coordinate(Particle& p, std::size_t k) { return k == 0 ? p.omega0 : p.omega_bar[k - 1]; }

// Per-coordinate gradient gap for each step in `hs`, keeping the best.
double worst_gradient_gap(const MdpSpec& mdp, const Ensemble& ensemble, std::span<const double> hs) {
  if (ensemble.feature.kind != FeatureKind::tanh) {
    throw PreconditionError("check_gradient: requires tanh features (ReLU kinks make differences ambiguous)");
  }
  for (double h : hs) {
    if (!(h > 0.0)) throw PreconditionError("check_gradient: h must be positive");
  }
  const EnsembleState st = evaluate_ensemble(ensemble, mdp);
  const VelocityField v = particle_velocity(ensemble, st.policy, st.evaluation.q, st.rho, mdp);
  const double n = static_cast<double>(ensemble.size());

  double worst = 0.0;
  Ensemble probe = ensemble;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      double best = std::numeric_limits<double>::infinity();
      for (double h : hs) {
        double& x = coordinate(probe.particles[i], k);
        const double x0 = x;
        x = x0 + h;
        const double up = ensemble_energy(probe, mdp);
        x = x0 - h;
        const double down = ensemble_energy(probe, mdp);
        x = x0;
        const double fd = n * (up - down) / (2.0 * h);
        const double analytic = v.per_particle[i][k];
        const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-4});
        best = std::min(best, std::abs(analytic - fd) / scale);
      }
      worst = std::max(worst, best);
    }
  }
  return worst;
}

}  // namespace

CheckReport make_report(std::string name, double measured, double threshold, std::string details) {
  CheckReport r;
  r.name = std::move(name);
  r.measured = measured;
  r.threshold = threshold;
  r.pass = measured <= threshold;
  r.details = std::move(details);
  return r;
}

void write_reports_csv(std::ostream& out, std::span<const CheckReport> reports) {
  out << "name,pass,measured,threshold,details\n";
  char num[64];
  for (const CheckReport& r : reports) {
    out << csv_field(r.name) << ',' << (r.pass ? "true" : "false") << ',';
    std::snprintf(num, sizeof num, "%.17g", r.measured);
    out << num << ',';
    std::snprintf(num, sizeof num, "%.17g", r.threshold);
    out << num << ',' << csv_field(r.details) << '\n';
  }
}

Matrix residual_delta(const PolicyTable& policy, const QTable& q, const ValueVector& v, double tau) {
  const Matrix& d = policy.density;
  if (d.rows() != q.values.rows() || d.cols() != q.values.cols() || v.values.size() != d.rows()) {
    throw ShapeError("residual_delta: inconsistent table shapes");
  }
  Matrix delta(d.rows(), d.cols());
  for (Eigen::Index s = 0; s < d.rows(); ++s) {
    for (Eigen::Index a = 0; a < d.cols(); ++a) {
      if (!(d(s, a) > 0.0)) throw DomainError("residual_delta: density entries must be positive");
      delta(s, a) = q.values(s, a) - tau * std::log(d(s, a)) - v.values[s];
    }
  }
  return delta;
}

MdpSpec random_mdp(int n_s, int n_a, double gamma, double tau, std::uint64_t seed) {
  const CounterRng rng(derive_seed(seed, 0x6d6470));
  std::uint64_t c = 0;
  Matrix transition(static_cast<Eigen::Index>(n_s) * n_a, n_s);
  for (Eigen::Index row = 0; row < transition.rows(); ++row) {
    for (int k = 0; k < n_s; ++k) transition(row, k) = rng.uniform(c++);
    transition.row(row) /= transition.row(row).sum();
  }
  Matrix reward(n_s, n_a);
  for (int s = 0; s < n_s; ++s) {
    for (int a = 0; a < n_a; ++a) reward(s, a) = rng.uniform(c++, -1.0, 1.0);
  }
  Vector rho0(n_s);
  for (int s = 0; s < n_s; ++s) rho0[s] = rng.uniform(c++);
  rho0 /= rho0.sum();
  return make_mdp(std::move(transition), std::move(reward), gamma, tau, std::move(rho0));
}

PolicyTable random_policy(const MdpSpec& mdp, std::uint64_t seed, double scale) {
  const CounterRng rng(derive_seed(seed, 0x706f6c));
  Matrix f(mdp.n_s, mdp.n_a);
  std::uint64_t c = 0;
  for (int s = 0; s < mdp.n_s; ++s) {
    for (int a = 0; a < mdp.n_a; ++a) f(s, a) = scale * rng.normal(c++);
  }
  return softmax_policy(f, mdp);
}

QTable random_q(const MdpSpec& mdp, std::uint64_t seed, double lo, double hi) {
  const CounterRng rng(derive_seed(seed, 0x71));
  Matrix q(mdp.n_s, mdp.n_a);
  std::uint64_t c = 0;
  for (int s = 0; s < mdp.n_s; ++s) {
    for (int a = 0; a < mdp.n_a; ++a) q(s, a) = rng.uniform(c++, lo, hi);
  }
  return {std::move(q)};
}

Ensemble random_ensemble(int n, std::uint64_t seed, double sigma2, FeatureConfig cfg) {
  Ensemble e = init_ensemble(n, derive_seed(seed, 1), sigma2, 0.0, cfg);
  const CounterRng rng(derive_seed(seed, 2));
  const double sd = std::sqrt(sigma2);
  for (std::size_t i = 0; i < e.size(); ++i) e.particles[i].omega0 = sd * rng.normal(i);
  return e;
}

CheckReport check_gradient(const MdpSpec& mdp, const Ensemble& ensemble, double h) {
  const double hs[] = {h};
  return make_report("gradient_identity", worst_gradient_gap(mdp, ensemble, hs), 1e-4,
                     fmt("h=%.1e N=%.0f", h, static_cast<double>(ensemble.size())));
}

CheckReport check_gradient_sweep(const MdpSpec& mdp, const Ensemble& ensemble, std::span<const double> hs) {
  return make_report("gradient_identity_sweep", worst_gradient_gap(mdp, ensemble, hs), 1e-4,
                     fmt("best of %.0f steps", static_cast<double>(hs.size())));
}

double contraction_ratio(const MdpSpec& mdp, const QTable& q1, const QTable& q2) {
  const double gap_in = (q1.values - q2.values).cwiseAbs().maxCoeff();
  if (gap_in == 0.0) return 0.0;
  const double gap_out =
      (soft_bellman_backup(q1, mdp).values - soft_bellman_backup(q2, mdp).values).cwiseAbs().maxCoeff();
  return gap_out / gap_in;
}

CheckReport check_contraction(const MdpSpec& mdp, int trials, std::uint64_t seed) {
  if (trials < 1) throw PreconditionError("check_contraction: trials must be at least 1");
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const QTable q1 = random_q(mdp, derive_seed(seed, 2 * static_cast<std::uint64_t>(t)), -5.0, 5.0);
    const QTable q2 = random_q(mdp, derive_seed(seed, 2 * static_cast<std::uint64_t>(t) + 1), -5.0, 5.0);
    worst = std::max(worst, contraction_ratio(mdp, q1, q2));
  }
  return make_report("contraction", worst, mdp.gamma + 1e-12,
                     fmt("gamma=%.3g trials=%.0f", mdp.gamma, static_cast<double>(trials)));
}

std::vector<CheckReport> check_invariances(const MdpSpec& mdp, const Ensemble& ensemble) {
  std::vector<CheckReport> out;
  const Particle constant{0.0, {0.0, 0.0, 1.0}};

  {
    // Same width on both sides; only the constant particle's output weight differs.
    Ensemble base = ensemble;
    base.particles.push_back(constant);
    Ensemble shifted = base;
    shifted.particles.back().omega0 = 3.0;

    const EnsembleState st0 = evaluate_ensemble(base, mdp);
    const EnsembleState st1 = evaluate_ensemble(shifted, mdp);
    const double policy_gap = (st0.policy.density - st1.policy.density).cwiseAbs().maxCoeff();
    out.push_back(make_report("shift_invariance_policy", policy_gap, 1e-12, "constant particle omega0 0 -> 3"));

    const VelocityField v0 = particle_velocity(base, st0.policy, st0.evaluation.q, st0.rho, mdp);
    const VelocityField v1 = particle_velocity(shifted, st1.policy, st1.evaluation.q, st1.rho, mdp);
    double field_gap = 0.0;
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
      for (std::size_t k = 0; k < 4; ++k) {
        field_gap = std::max(field_gap, std::abs(v0.per_particle[i][k] - v1.per_particle[i][k]));
      }
    }
    out.push_back(make_report("shift_invariance_velocity", field_gap, 1e-12, "other particles only"));
  }

  {
    const EnsembleState st = evaluate_ensemble(ensemble, mdp);
    const kernels::CellWeights cells = transport_weights(st.policy, st.evaluation.q, st.rho, mdp);
    std::vector<Particle> doubled = ensemble.particles;
    for (Particle& p : doubled) p.omega0 *= 2.0;
    const VelocityField v = velocity_in_field(ensemble.particles, ensemble.feature, cells);
    const VelocityField v2 = velocity_in_field(doubled, ensemble.feature, cells);

    double gap0 = 0.0, gap_rel = 0.0;
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
      gap0 = std::max(gap0, std::abs(v2.per_particle[i][0] - v.per_particle[i][0]));
      for (std::size_t k = 1; k < 4; ++k) {
        const double expect = 2.0 * v.per_particle[i][k];
        const double diff = std::abs(v2.per_particle[i][k] - expect);
        if (diff > 0.0) gap_rel = std::max(gap_rel, diff / std::max(std::abs(expect), std::numeric_limits<double>::min()));
      }
    }
    out.push_back(make_report("homogeneity_omega0_component", gap0, 1e-13, "omega0 doubled in frozen field"));
    out.push_back(make_report("homogeneity_inner_component", gap_rel, 1e-12, "relative; expected exact doubling"));
  }
  return out;
}

CheckReport check_bandit_equivalence(const BanditSpec& spec, const Ensemble& ensemble) {
  const MdpSpec mdp = embed_bandit(spec);
  const EnsembleState st = evaluate_ensemble(ensemble, mdp);
  const VelocityField general = particle_velocity(ensemble, st.policy, st.evaluation.q, st.rho, mdp);
  const VelocityField direct = bandit_vector_field(spec, ensemble);
  double gap = 0.0;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      gap = std::max(gap, std::abs(general.per_particle[i][k] - direct.per_particle[i][k]));
    }
  }
  return make_report("bandit_field_equivalence", gap, 1e-12);
}

CheckReport check_soft_oracle(const MdpSpec& mdp, double tol) {
  const SoftOptimum opt = soft_value_iteration(mdp, tol, 1000000);
  const double residual = residual_delta(opt.policy, opt.q, opt.value, mdp.tau).cwiseAbs().maxCoeff();
  return make_report("boltzmann_residual", residual, 1e-9,
                     fmt("iterations=%.0f gamma=%.3g", opt.iterations, mdp.gamma));
}

CheckReport check_inversion_roundtrip(const MdpSpec& skeleton, const QTable& target, double tol, double threshold) {
  MdpSpec mdp = skeleton;
  mdp.mean_reward = invert_soft_bellman(target, skeleton);
  const SoftOptimum opt = soft_value_iteration(mdp, tol, 1000000);
  const double gap = (opt.q.values - target.values).cwiseAbs().maxCoeff();
  return make_report("inversion_roundtrip", gap, threshold, fmt("tol=%.1e gamma=%.3g", tol, mdp.gamma));
}

CheckReport check_occupancy_mass(const MdpSpec& mdp, const PolicyTable& policy) {
  const OccupancyVector rho = occupancy(policy, mdp);
  const double gap = std::abs(rho.mass.sum() - 1.0 / (1.0 - mdp.gamma));
  return make_report("occupancy_mass", gap, 1e-8, fmt("gamma=%.3g", mdp.gamma));
}

CheckReport check_occupancy_series(const MdpSpec& mdp, const PolicyTable& policy, int terms, double threshold) {
  const OccupancyVector rho = occupancy(policy, mdp);
  const Matrix p_t = policy_transition(policy, mdp).transpose();
  Vector term = mdp.rho0;
  Vector series = Vector::Zero(mdp.n_s);
  for (int t = 0; t < terms; ++t) {
    series += term;
    term = mdp.gamma * (p_t * term);
  }
  const double gap = (rho.mass - series).cwiseAbs().maxCoeff();
  return make_report("occupancy_series", gap, threshold,
                     fmt("terms=%.0f gamma=%.3g", static_cast<double>(terms), mdp.gamma));
}

CheckReport check_monotone_error(std::span<const TrainRecord> records, const std::string& name) {
  double worst = 0.0;
  for (std::size_t k = 1; k < records.size(); ++k) {
    const double rise = records[k].error - records[k - 1].error;
    worst = std::max(worst, rise / std::max(1.0, std::abs(records[k - 1].energy)));
  }
  return make_report(name, worst, 1e-9, "largest scaled error increase between records");
}

CheckReport check_error_reduction(std::span<const TrainRecord> records, double max_ratio, const std::string& name) {
  if (records.empty()) return make_report(name, std::numeric_limits<double>::quiet_NaN(), max_ratio, "no records");
  const double initial = records.front().error;
  const double final_error = records.back().error;
  return make_report(name, final_error / initial, max_ratio, fmt("initial=%.4e final=%.4e", initial, final_error));
}

std::vector<CheckReport> check_fixed_point(const MdpSpec& mdp, const Ensemble& optimal, long steps, double beta) {
  const TrainResult run = train(mdp, optimal, steps, beta, 1, 0.0);
  double rms = 0.0;
  for (const TrainRecord& r : run.records) rms = std::max(rms, r.grad_norm);
  double drift = 0.0;
  for (std::size_t i = 0; i < optimal.size(); ++i) {
    const Particle& a = optimal.particles[i];
    const Particle& b = run.ensemble.particles[i];
    drift = std::max(drift, std::abs(a.omega0 - b.omega0));
    for (std::size_t k = 0; k < 3; ++k) drift = std::max(drift, std::abs(a.omega_bar[k] - b.omega_bar[k]));
  }
  return {make_report("stationary_rms_velocity", rms, 1e-8, "max over steps"),
          make_report("stationary_drift", drift, 1e-6, fmt("steps=%.0f beta=%.1e", static_cast<double>(steps), beta))};
}

bool ChaosStudy::nonincreasing(double slack) const {
  for (std::size_t k = 1; k < discrepancies.size(); ++k) {
    if (!(discrepancies[k] <= (1.0 + slack) * discrepancies[k - 1])) return false;
  }
  return true;
}

double field_discrepancy(const MdpSpec& mdp, const Ensemble& a, const Ensemble& b, long steps, double beta) {
  const long every = std::max(1L, steps);
  const Matrix fa = energy_field(train(mdp, a, steps, beta, every, 0.0).ensemble, mdp);
  const Matrix fb = energy_field(train(mdp, b, steps, beta, every, 0.0).ensemble, mdp);
  return (fa - fb).cwiseAbs().maxCoeff();
}

ChaosStudy chaos_study(const MdpSpec& mdp, std::span<const int> widths, std::span<const std::uint64_t> seeds,
                       long steps, double beta, const ChaosOptions& options) {
  if (widths.size() < 2) throw PreconditionError("chaos_study: need at least two widths");
  for (std::size_t k = 1; k < widths.size(); ++k) {
    if (widths[k] <= widths[k - 1]) throw PreconditionError("chaos_study: widths must be strictly increasing");
  }
  if (seeds.empty()) throw PreconditionError("chaos_study: need at least one seed");

  ChaosStudy study;
  study.widths.assign(widths.begin(), widths.end());
  study.discrepancies.assign(widths.size(), 0.0);
  study.reference_width = 8 * widths.back();

  const long every = std::max(1L, steps);
  for (std::uint64_t seed : seeds) {
    const Ensemble ref0 =
        init_ensemble(study.reference_width, derive_seed(seed, 0x726566), options.sigma2, 0.0, options.feature);
    const Matrix ref_field = energy_field(train(mdp, ref0, steps, beta, every, 0.0).ensemble, mdp);
    for (std::size_t k = 0; k < widths.size(); ++k) {
      const Ensemble e0 = init_ensemble(widths[k], derive_seed(seed, static_cast<std::uint64_t>(widths[k])),
                                        options.sigma2, 0.0, options.feature);
      const Matrix f = energy_field(train(mdp, e0, steps, beta, every, 0.0).ensemble, mdp);
      study.discrepancies[k] += (f - ref_field).cwiseAbs().maxCoeff();
    }
  }
  for (double& d : study.discrepancies) d /= static_cast<double>(seeds.size());
  return study;
}

}  // namespace mfpg
