#include "mfpg/rng.hpp"

#include <cmath>
#include <numbers>

namespace mfpg {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t CounterRng::bits(std::uint64_t counter) const noexcept {
  // Two rounds so that neighbouring keys do not produce correlated streams.
  return mix64(mix64(key_ + kGolden) ^ (counter * kGolden + 0x632be59bd9b4e019ULL));
}

double CounterRng::uniform(std::uint64_t counter) const noexcept {
  return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
}

double CounterRng::uniform(std::uint64_t counter, double lo, double hi) const noexcept {
  const double u = static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double CounterRng::normal(std::uint64_t counter) const noexcept {
  const double u1 = uniform(2 * counter);
  const double u2 = uniform(2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) + stream * kGolden);
}

}  // namespace mfpg
