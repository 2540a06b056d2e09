#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace hyperco {

// Runs fn(i) for i in [0, n). With threads > 1 the indices are claimed from a
// shared counter; each index writes only its own slot, so results do not
// depend on the schedule and stay byte-identical across thread counts.
template <typename Fn>
void parallel_for_indexed(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const auto workers = static_cast<std::size_t>(threads) < n
                           ? static_cast<std::size_t>(threads)
                           : n;
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  for (auto& t : pool) t.join();
}

}  // namespace hyperco
