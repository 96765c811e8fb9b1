#include "mfpg/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace mfpg {

std::size_t thread_limit() {
  static const std::size_t limit = [] {
    std::size_t n = 0;
    if (const char* env = std::getenv("MFPG_THREADS")) {
      try {
        n = static_cast<std::size_t>(std::stoul(env));
      } catch (...) {
        n = 0;
      }
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
  }();
  return limit;
}

void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  min_chunk = std::max<std::size_t>(1, min_chunk);
  const std::size_t workers = std::min(thread_limit(), (n + min_chunk - 1) / min_chunk);
  if (workers <= 1) {
    body(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(0, std::min(n, chunk));
}

}  // namespace mfpg
