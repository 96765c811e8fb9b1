#include "mfpg/kernels.hpp"

#include <immintrin.h>

namespace mfpg::kernels::avx2 {

void relu_energy_rows(const ParticleColumns& particles, std::span<const double> s_coords,
                      std::span<const double> a_coords, std::size_t row_begin, std::size_t row_end,
                      std::span<double> out) {
  const std::size_t n = particles.size();
  const std::size_t n_a = a_coords.size();
  const std::size_t vec_end = n_a - n_a % 4;
  const __m256d zero = _mm256_setzero_pd();
  const __m256d count = _mm256_set1_pd(static_cast<double>(n));
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const double s = s_coords[r];
    for (std::size_t j = 0; j < vec_end; j += 4) {
      const __m256d a = _mm256_loadu_pd(a_coords.data() + j);
      __m256d acc = zero;
      for (std::size_t i = 0; i < n; ++i) {
        const __m256d ws_s = _mm256_set1_pd(particles.w_s[i] * s);
        const __m256d wa_a = _mm256_mul_pd(_mm256_set1_pd(particles.w_a[i]), a);
        const __m256d z = _mm256_add_pd(_mm256_add_pd(ws_s, wa_a), _mm256_set1_pd(particles.bias[i]));
        const __m256d phi = _mm256_max_pd(z, zero);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(particles.omega0[i]), phi));
      }
      _mm256_storeu_pd(out.data() + r * n_a + j, _mm256_div_pd(acc, count));
    }
    if (vec_end < n_a) {
      // Remainder columns go through the reference loop one row at a time.
      double tail[4];
      const std::span<const double> tail_a = a_coords.subspan(vec_end);
      const std::span<const double> one_s(&s_coords[r], 1);
      scalar::relu_energy_rows(particles, one_s, tail_a, 0, 1, std::span<double>(tail, tail_a.size()));
      for (std::size_t j = vec_end; j < n_a; ++j) out[r * n_a + j] = tail[j - vec_end];
    }
  }
}

void relu_velocity(const ParticleColumns& particles, const CellWeights& cells, std::size_t first, std::size_t last,
                   std::span<double> out) {
  const std::size_t m = cells.size();
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = first;
  for (; i + 4 <= last; i += 4) {
    const __m256d ws = _mm256_loadu_pd(particles.w_s.data() + i);
    const __m256d wa = _mm256_loadu_pd(particles.w_a.data() + i);
    const __m256d b = _mm256_loadu_pd(particles.bias.data() + i);
    __m256d acc_phi = zero, acc_s = zero, acc_a = zero, acc_b = zero;
    for (std::size_t c = 0; c < m; ++c) {
      const __m256d s = _mm256_set1_pd(cells.s[c]);
      const __m256d a = _mm256_set1_pd(cells.a[c]);
      const __m256d z = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(ws, s), _mm256_mul_pd(wa, a)), b);
      const __m256d active = _mm256_cmp_pd(z, zero, _CMP_GT_OQ);
      const __m256d phi = _mm256_max_pd(z, zero);
      const __m256d w = _mm256_set1_pd(cells.weight[c]);
      acc_phi = _mm256_add_pd(acc_phi, _mm256_mul_pd(w, phi));
      acc_s = _mm256_add_pd(acc_s, _mm256_and_pd(active, _mm256_set1_pd(cells.weight_s[c])));
      acc_a = _mm256_add_pd(acc_a, _mm256_and_pd(active, _mm256_set1_pd(cells.weight_a[c])));
      acc_b = _mm256_add_pd(acc_b, _mm256_and_pd(active, w));
    }
    const __m256d w0 = _mm256_loadu_pd(particles.omega0.data() + i);
    alignas(32) double v_phi[4], v_s[4], v_a[4], v_b[4];
    _mm256_store_pd(v_phi, acc_phi);
    _mm256_store_pd(v_s, _mm256_mul_pd(w0, acc_s));
    _mm256_store_pd(v_a, _mm256_mul_pd(w0, acc_a));
    _mm256_store_pd(v_b, _mm256_mul_pd(w0, acc_b));
    for (std::size_t k = 0; k < 4; ++k) {
      out[4 * (i + k) + 0] = v_phi[k];
      out[4 * (i + k) + 1] = v_s[k];
      out[4 * (i + k) + 2] = v_a[k];
      out[4 * (i + k) + 3] = v_b[k];
    }
  }
  if (i < last) scalar::relu_velocity(particles, cells, i, last, out);
}

}  // namespace mfpg::kernels::avx2
