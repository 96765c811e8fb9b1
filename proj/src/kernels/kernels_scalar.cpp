#include "mfpg/kernels.hpp"

namespace mfpg::kernels::scalar {

void relu_energy_rows(const ParticleColumns& particles, std::span<const double> s_coords,
                      std::span<const double> a_coords, std::size_t row_begin, std::size_t row_end,
                      std::span<double> out) {
  const std::size_t n = particles.size();
  const std::size_t n_a = a_coords.size();
  const double count = static_cast<double>(n);
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const double s = s_coords[r];
    for (std::size_t j = 0; j < n_a; ++j) {
      const double a = a_coords[j];
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double z = (particles.w_s[i] * s + particles.w_a[i] * a) + particles.bias[i];
        const double phi = z > 0.0 ? z : 0.0;
        acc = acc + particles.omega0[i] * phi;
      }
      out[r * n_a + j] = acc / count;
    }
  }
}

void relu_velocity(const ParticleColumns& particles, const CellWeights& cells, std::size_t first, std::size_t last,
                   std::span<double> out) {
  const std::size_t m = cells.size();
  for (std::size_t i = first; i < last; ++i) {
    const double ws = particles.w_s[i];
    const double wa = particles.w_a[i];
    const double b = particles.bias[i];
    double acc_phi = 0.0, acc_s = 0.0, acc_a = 0.0, acc_b = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double z = (ws * cells.s[c] + wa * cells.a[c]) + b;
      const bool active = z > 0.0;
      const double phi = active ? z : 0.0;
      acc_phi = acc_phi + cells.weight[c] * phi;
      acc_s = acc_s + (active ? cells.weight_s[c] : 0.0);
      acc_a = acc_a + (active ? cells.weight_a[c] : 0.0);
      acc_b = acc_b + (active ? cells.weight[c] : 0.0);
    }
    const double w0 = particles.omega0[i];
    out[4 * i + 0] = acc_phi;
    out[4 * i + 1] = w0 * acc_s;
    out[4 * i + 2] = w0 * acc_a;
    out[4 * i + 3] = w0 * acc_b;
  }
}

}  // namespace mfpg::kernels::scalar
