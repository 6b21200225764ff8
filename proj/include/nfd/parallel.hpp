#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace nfd {

/// Splits [0, count) into `chunks` fixed ranges and runs fn(chunk, begin, end)
/// on up to `workers` threads. Chunk boundaries do not depend on the worker
/// count, so per-chunk partial results combined in chunk order are
/// bit-identical for any degree of parallelism.
template <class Fn>
void for_each_chunk(std::size_t count, std::size_t chunks, unsigned workers, Fn&& fn) {
  chunks = std::max<std::size_t>(1, std::min(chunks, std::max<std::size_t>(count, 1)));
  auto range = [&](std::size_t c) {
    const std::size_t begin = count * c / chunks;
    const std::size_t end = count * (c + 1) / chunks;
    return std::pair{begin, end};
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(chunks)));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      auto [b, e] = range(c);
      fn(c, b, e);
    }
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < chunks; c += workers) {
        auto [b, e] = range(c);
        fn(c, b, e);
      }
    });
  }
  for (auto& t : pool) t.join();
}

inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace nfd
