#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace fml {

/// Number of worker threads for slab-parallel loops. FML_THREADS overrides
/// the hardware default.
inline unsigned worker_count() {
  if (const char* env = std::getenv("FML_THREADS")) {
    const int value = std::atoi(env);
    if (value > 0) return static_cast<unsigned>(value);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) split into contiguous slabs. Every index
/// is written by exactly one thread, so results never depend on the split.
/// Reductions must not go through this helper.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const unsigned workers = worker_count();
  if (workers <= 1 || count < 4096) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t slab = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * slab;
    const std::size_t end = std::min(count, begin + slab);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] {
      for (std::size_t i = begin; i < end; ++i) body(i);
    });
  }
}

}  // namespace fml
