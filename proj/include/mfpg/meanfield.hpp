#pragma once

#include "mfpg/kernels.hpp"
#include "mfpg/mdp.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace mfpg {

enum class FeatureKind { relu, tanh };

std::string_view to_string(FeatureKind kind) noexcept;
/// Throws ConfigError for anything but "relu" / "tanh".
FeatureKind parse_feature_kind(std::string_view text);

struct FeatureConfig {
  FeatureKind kind = FeatureKind::relu;
  int input_dim = 2;

  bool operator==(const FeatureConfig&) const = default;
};

/// Inner weights omega_bar = (w_s, w_a, b).
using InnerWeights = std::array<double, 3>;

/// One neuron psi(s, a; omega) = omega0 * phi(s, a; omega_bar).
struct Particle {
  double omega0 = 0.0;
  InnerWeights omega_bar{};

  bool operator==(const Particle&) const = default;
};

/// Empirical measure (1/N) Sum_i delta_{omega_i} over neuron parameters.
struct Ensemble {
  std::vector<Particle> particles;
  FeatureConfig feature;

  std::size_t size() const noexcept { return particles.size(); }
  bool operator==(const Ensemble&) const = default;
};

double feature(double s, double a, const InnerWeights& w, const FeatureConfig& cfg);

/// d phi / d omega_bar. The ReLU subgradient at a zero pre-activation is 0.
InnerWeights feature_grad(double s, double a, const InnerWeights& w, const FeatureConfig& cfg);

kernels::ParticleColumns to_columns(const std::vector<Particle>& particles);

/// f(s, a) = (1/N) Sum_i omega0_i phi(s, a; omega_bar_i) on the MDP grid,
/// particles summed in index order.
Matrix energy_field(const Ensemble& ensemble, const MdpSpec& mdp);

/// density(s, a) = exp f(s, a) / Sum_a' w_a exp f(s, a'), max-shifted per row.
PolicyTable softmax_policy(const Matrix& f, const MdpSpec& mdp);

/// omega_bar entries i.i.d. N(0, sigma2) from a counter-based stream keyed by
/// `seed`; every omega0 set to `omega0_init`.
Ensemble init_ensemble(int n, std::uint64_t seed, double sigma2, double omega0_init, FeatureConfig cfg);

/// Each particle repeated `copies` times. The energy field is unchanged.
Ensemble replicate(const Ensemble& ensemble, int copies);

/// Text checkpoint: header `MFPG-CKPT v1`, then `N=<n> dim=3 feature=<kind>`,
/// then one `omega0 w_s w_a b` line per particle with 17 significant digits.
void write_checkpoint(std::ostream& out, const Ensemble& ensemble);
Ensemble read_checkpoint(std::istream& in);

}  // namespace mfpg
