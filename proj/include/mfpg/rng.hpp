#pragma once

#include <cstdint>

namespace mfpg {

/// Counter-based generator: every draw is a pure function of (key, counter),
/// so values can be produced in any order or in parallel and still match.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t key() const noexcept { return key_; }

  std::uint64_t bits(std::uint64_t counter) const noexcept;

  /// Uniform on (0, 1].
  double uniform(std::uint64_t counter) const noexcept;

  /// Uniform on [lo, hi).
  double uniform(std::uint64_t counter, double lo, double hi) const noexcept;

  /// Standard normal via Box-Muller; consumes counters 2c and 2c+1.
  double normal(std::uint64_t counter) const noexcept;

 private:
  std::uint64_t key_;
};

/// Independent key for a named sub-stream of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace mfpg
