#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace cardiostrain {

/// Worker count used by the voxel-parallel loops; 1 runs inline.
int thread_count();
void set_thread_count(int n);

/// Calls fn(begin, end) over contiguous chunks of [0, n). Each index is visited exactly once
/// and chunks never overlap, so results do not depend on the thread count when fn writes only
/// to per-index outputs.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, thread_count()));
  if (workers == 1 || n < 2 * workers) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace cardiostrain
