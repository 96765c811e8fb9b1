#pragma once

// Inner loops of the mean-field model for ReLU features.
//
// Every backend evaluates the pre-activation as (w_s * s + w_a * a) + b and
// keeps one accumulator per output, updated in the same order as the scalar
// reference. The AVX2 variants put independent outputs in separate lanes
// (grid cells for the energy field, particles for the velocity), so all
// backends return bit-identical results.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace mfpg::kernels {

enum class Backend { scalar, avx2 };

std::string_view backend_name(Backend b) noexcept;

/// True when the AVX2 path was compiled in and the CPU supports it.
bool avx2_available() noexcept;

/// Fastest available backend, unless MFPG_KERNEL=scalar forces the reference.
Backend default_backend() noexcept;

/// Particle parameters in structure-of-arrays layout.
struct ParticleColumns {
  std::vector<double> omega0;
  std::vector<double> w_s;
  std::vector<double> w_a;
  std::vector<double> bias;

  std::size_t size() const noexcept { return omega0.size(); }
};

/// Per-cell transport weights, flattened row-major over the (s, a) grid.
/// `weight` is rho(s) w_a pi(s, a) times the centered advantage; `weight_s`
/// and `weight_a` are the same weight multiplied by the cell coordinates.
struct CellWeights {
  std::vector<double> s;
  std::vector<double> a;
  std::vector<double> weight;
  std::vector<double> weight_s;
  std::vector<double> weight_a;

  std::size_t size() const noexcept { return weight.size(); }
};

/// out[r * n_a + j] = (1/N) Sum_i omega0_i relu(w_s_i s_r + w_a_i a_j + b_i)
/// for rows r in [row_begin, row_end).
void relu_energy_rows(Backend backend, const ParticleColumns& particles, std::span<const double> s_coords,
                      std::span<const double> a_coords, std::size_t row_begin, std::size_t row_end,
                      std::span<double> out);

/// Velocity of particles [first, last) in the field described by `cells`.
/// Writes four components per particle to out[4 i .. 4 i + 3].
void relu_velocity(Backend backend, const ParticleColumns& particles, const CellWeights& cells, std::size_t first,
                   std::size_t last, std::span<double> out);

namespace scalar {
void relu_energy_rows(const ParticleColumns& particles, std::span<const double> s_coords,
                      std::span<const double> a_coords, std::size_t row_begin, std::size_t row_end,
                      std::span<double> out);
void relu_velocity(const ParticleColumns& particles, const CellWeights& cells, std::size_t first, std::size_t last,
                   std::span<double> out);
}  // namespace scalar

#if defined(MFPG_HAVE_AVX2)
namespace avx2 {
void relu_energy_rows(const ParticleColumns& particles, std::span<const double> s_coords,
                      std::span<const double> a_coords, std::size_t row_begin, std::size_t row_end,
                      std::span<double> out);
void relu_velocity(const ParticleColumns& particles, const CellWeights& cells, std::size_t first, std::size_t last,
                   std::span<double> out);
}  // namespace avx2
#endif

}  // namespace mfpg::kernels
