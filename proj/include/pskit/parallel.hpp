#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace pskit {

// Static block partition; each index is computed exactly once, results land
// in caller-owned slots, so reductions are deterministic regardless of the
// worker count.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t)>& body) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::size_t w = std::min<std::size_t>(std::size_t(workers), n);
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (std::size_t k = 0; k < w; ++k) {
    threads.emplace_back([&, k] {
      for (std::size_t i = k; i < n; i += w) body(i);
    });
  }
  for (auto& th : threads) th.join();
}

}  // namespace pskit
