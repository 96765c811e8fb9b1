#include "mfpg/meanfield.hpp"

#include "mfpg/errors.hpp"
#include "mfpg/parallel.hpp"
#include "mfpg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace mfpg {

namespace {

double pre_activation(double s, double a, const InnerWeights& w) { return (w[0] * s + w[1] * a) + w[2]; }

std::vector<double> state_coords(const MdpSpec& mdp) {
  std::vector<double> out(static_cast<std::size_t>(mdp.n_s));
  for (int i = 0; i < mdp.n_s; ++i) out[i] = mdp.state_coord(i);
  return out;
}

std::vector<double> action_coords(const MdpSpec& mdp) {
  std::vector<double> out(static_cast<std::size_t>(mdp.n_a));
  for (int j = 0; j < mdp.n_a; ++j) out[j] = mdp.action_coord(j);
  return out;
}

}  // namespace

std::string_view to_string(FeatureKind kind) noexcept { return kind == FeatureKind::tanh ? "tanh" : "relu"; }

FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "relu") return FeatureKind::relu;
  if (text == "tanh") return FeatureKind::tanh;
  throw ConfigError("unknown feature kind '" + std::string(text) + "'");
}

double feature(double s, double a, const InnerWeights& w, const FeatureConfig& cfg) {
  const double z = pre_activation(s, a, w);
  if (cfg.kind == FeatureKind::tanh) return std::tanh(z);
  return z > 0.0 ? z : 0.0;
}

InnerWeights feature_grad(double s, double a, const InnerWeights& w, const FeatureConfig& cfg) {
  const double z = pre_activation(s, a, w);
  double slope;
  if (cfg.kind == FeatureKind::tanh) {
    const double t = std::tanh(z);
    slope = 1.0 - t * t;
  } else {
    slope = z > 0.0 ? 1.0 : 0.0;
  }
  return {slope * s, slope * a, slope};
}

kernels::ParticleColumns to_columns(const std::vector<Particle>& particles) {
  kernels::ParticleColumns cols;
  const std::size_t n = particles.size();
  cols.omega0.resize(n);
  cols.w_s.resize(n);
  cols.w_a.resize(n);
  cols.bias.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    cols.omega0[i] = particles[i].omega0;
    cols.w_s[i] = particles[i].omega_bar[0];
    cols.w_a[i] = particles[i].omega_bar[1];
    cols.bias[i] = particles[i].omega_bar[2];
  }
  return cols;
}

Matrix energy_field(const Ensemble& ensemble, const MdpSpec& mdp) {
  Matrix f(mdp.n_s, mdp.n_a);
  const std::size_t n = ensemble.size();
  if (n == 0) throw PreconditionError("energy_field: empty ensemble");
  const std::vector<double> s = state_coords(mdp);
  const std::vector<double> a = action_coords(mdp);
  const std::span<double> out(f.data(), static_cast<std::size_t>(f.size()));

  if (ensemble.feature.kind == FeatureKind::relu) {
    const kernels::ParticleColumns cols = to_columns(ensemble.particles);
    const kernels::Backend backend = kernels::default_backend();
    const std::size_t rows_per_chunk = std::max<std::size_t>(1, 200000 / std::max<std::size_t>(1, n * a.size()));
    parallel_for(s.size(), rows_per_chunk, [&](std::size_t begin, std::size_t end) {
      kernels::relu_energy_rows(backend, cols, s, a, begin, end, out);
    });
    return f;
  }

  const double count = static_cast<double>(n);
  for (int r = 0; r < mdp.n_s; ++r) {
    for (int j = 0; j < mdp.n_a; ++j) {
      double acc = 0.0;
      for (const Particle& p : ensemble.particles) acc = acc + p.omega0 * feature(s[r], a[j], p.omega_bar, ensemble.feature);
      f(r, j) = acc / count;
    }
  }
  return f;
}

PolicyTable softmax_policy(const Matrix& f, const MdpSpec& mdp) {
  if (f.rows() != mdp.n_s || f.cols() != mdp.n_a) throw ShapeError("softmax_policy: field does not match grid");
  Matrix density(mdp.n_s, mdp.n_a);
  for (int s = 0; s < mdp.n_s; ++s) {
    const double m = f.row(s).maxCoeff();
    double z = 0.0;
    for (int a = 0; a < mdp.n_a; ++a) {
      density(s, a) = std::exp(f(s, a) - m);
      z += mdp.action_weight * density(s, a);
    }
    density.row(s) /= z;
  }
  return {std::move(density)};
}

Ensemble init_ensemble(int n, std::uint64_t seed, double sigma2, double omega0_init, FeatureConfig cfg) {
  if (n < 1) throw PreconditionError("init_ensemble: N must be at least 1");
  if (!(sigma2 > 0.0)) throw PreconditionError("init_ensemble: sigma2 must be positive");
  const CounterRng rng(seed);
  const double sd = std::sqrt(sigma2);
  Ensemble e;
  e.feature = cfg;
  e.particles.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < e.particles.size(); ++i) {
    Particle& p = e.particles[i];
    p.omega0 = omega0_init;
    for (std::size_t k = 0; k < 3; ++k) p.omega_bar[k] = sd * rng.normal(4 * i + k);
  }
  return e;
}

Ensemble replicate(const Ensemble& ensemble, int copies) {
  if (copies < 1) throw PreconditionError("replicate: copies must be at least 1");
  Ensemble out;
  out.feature = ensemble.feature;
  out.particles.reserve(ensemble.size() * static_cast<std::size_t>(copies));
  for (const Particle& p : ensemble.particles) {
    for (int c = 0; c < copies; ++c) out.particles.push_back(p);
  }
  return out;
}

void write_checkpoint(std::ostream& out, const Ensemble& ensemble) {
  out << "MFPG-CKPT v1\n";
  out << "N=" << ensemble.size() << " dim=3 feature=" << to_string(ensemble.feature.kind) << '\n';
  char line[160];
  for (const Particle& p : ensemble.particles) {
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g %.17g\n", p.omega0, p.omega_bar[0], p.omega_bar[1],
                  p.omega_bar[2]);
    out << line;
  }
  if (!out) throw IoError("failed to write checkpoint");
}

Ensemble read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "MFPG-CKPT v1") throw IoError("checkpoint: bad magic line");
  if (!std::getline(in, line)) throw IoError("checkpoint: missing header");

  long n = -1;
  int dim = -1;
  char kind[16] = {};
  if (std::sscanf(line.c_str(), "N=%ld dim=%d feature=%15s", &n, &dim, kind) != 3 || n < 1 || dim != 3) {
    throw IoError("checkpoint: malformed header '" + line + "'");
  }
  Ensemble e;
  try {
    e.feature.kind = parse_feature_kind(kind);
  } catch (const ConfigError& err) {
    throw IoError(std::string("checkpoint: ") + err.what());
  }
  e.particles.resize(static_cast<std::size_t>(n));
  for (Particle& p : e.particles) {
    if (!std::getline(in, line)) throw IoError("checkpoint: truncated particle list");
    std::istringstream row(line);
    if (!(row >> p.omega0 >> p.omega_bar[0] >> p.omega_bar[1] >> p.omega_bar[2])) {
      throw IoError("checkpoint: malformed particle line '" + line + "'");
    }
  }
  return e;
}

}  // namespace mfpg
