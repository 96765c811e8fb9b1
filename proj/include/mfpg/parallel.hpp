#pragma once

#include <cstddef>
#include <functional>

namespace mfpg {

/// Worker cap from MFPG_THREADS (0 or unset = hardware concurrency).
std::size_t thread_limit();

/// Splits [0, n) into contiguous chunks of at least `min_chunk` items and runs
/// `body(begin, end)` on each. Chunks write disjoint outputs, so results do not
/// depend on the thread count.
void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace mfpg
