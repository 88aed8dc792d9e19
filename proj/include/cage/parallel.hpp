#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace cage {

/// Process-wide cap on worker threads (CLI --threads).
inline int& thread_count() {
  static int n = 1;
  return n;
}

inline void set_thread_count(int n) { thread_count() = std::max(1, n); }

/// Runs fn(begin, end) over [0, n) in fixed chunks of chunk_size. Chunk
/// boundaries never depend on the thread count, so any chunk-local
/// arithmetic gives identical results for every --threads value.
inline void parallel_chunks(int n, int chunk_size, const std::function<void(int, int)>& fn) {
  chunk_size = std::max(1, chunk_size);
  int num_chunks = (n + chunk_size - 1) / chunk_size;
  int workers = std::min(thread_count(), num_chunks);
  if (workers <= 1) {
    for (int c = 0; c < num_chunks; ++c)
      fn(c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int c = next.fetch_add(1); c < num_chunks; c = next.fetch_add(1))
        fn(c * chunk_size, std::min(n, (c + 1) * chunk_size));
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace cage
