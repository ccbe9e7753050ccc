#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace cvgad {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Splits [0, count) into contiguous chunks, one per thread. Chunk boundaries
/// depend only on (count, threads), so any per-thread accumulation that is
/// later reduced in thread order is reproducible for a fixed thread count.
template <typename Fn>
void parallel_for_chunked(std::size_t count, int threads, Fn&& fn) {
  if (count == 0) return;
  const std::size_t nt = std::min<std::size_t>(threads < 1 ? 1 : threads, count);
  if (nt == 1) {
    fn(std::size_t{0}, count, 0);
    return;
  }
  const std::size_t base = count / nt;
  const std::size_t extra = count % nt;
  std::vector<std::thread> pool;
  pool.reserve(nt);
  std::size_t begin = 0;
  for (std::size_t t = 0; t < nt; ++t) {
    const std::size_t len = base + (t < extra ? 1 : 0);
    const std::size_t end = begin + len;
    pool.emplace_back([&fn, begin, end, t] { fn(begin, end, static_cast<int>(t)); });
    begin = end;
  }
  for (auto& th : pool) th.join();
}

}  // namespace cvgad
