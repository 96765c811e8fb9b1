#include "mfpg/kernels.hpp"

#include <cstdlib>
#include <string>

namespace mfpg::kernels {

std::string_view backend_name(Backend b) noexcept { return b == Backend::avx2 ? "avx2" : "scalar"; }

bool avx2_available() noexcept {
#if defined(MFPG_HAVE_AVX2)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend default_backend() noexcept {
  static const Backend chosen = [] {
    if (const char* env = std::getenv("MFPG_KERNEL"); env && std::string(env) == "scalar") return Backend::scalar;
    return avx2_available() ? Backend::avx2 : Backend::scalar;
  }();
  return chosen;
}

void relu_energy_rows(Backend backend, const ParticleColumns& particles, std::span<const double> s_coords,
                      std::span<const double> a_coords, std::size_t row_begin, std::size_t row_end,
                      std::span<double> out) {
#if defined(MFPG_HAVE_AVX2)
  if (backend == Backend::avx2 && avx2_available()) {
    avx2::relu_energy_rows(particles, s_coords, a_coords, row_begin, row_end, out);
    return;
  }
#endif
  (void)backend;
  scalar::relu_energy_rows(particles, s_coords, a_coords, row_begin, row_end, out);
}

void relu_velocity(Backend backend, const ParticleColumns& particles, const CellWeights& cells, std::size_t first,
                   std::size_t last, std::span<double> out) {
#if defined(MFPG_HAVE_AVX2)
  if (backend == Backend::avx2 && avx2_available()) {
    avx2::relu_velocity(particles, cells, first, last, out);
    return;
  }
#endif
  (void)backend;
  scalar::relu_velocity(particles, cells, first, last, out);
}

}  // namespace mfpg::kernels
