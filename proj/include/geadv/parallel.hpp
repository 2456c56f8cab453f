#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace geadv {

inline int worker_count() {
  if (const char* env = std::getenv("GEADV_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

/// Runs f(i) for i in [begin, end) across worker threads. Each index is
/// processed by exactly one thread and must write only to its own outputs,
/// which keeps results bit-identical for any thread count.
template <class F>
void parallel_for(int64_t begin, int64_t end, F&& f) {
  const int64_t count = end - begin;
  if (count <= 0) return;
  int threads = worker_count();
  if (threads <= 1 || count == 1) {
    for (int64_t i = begin; i < end; ++i) f(i);
    return;
  }
  if (int64_t(threads) > count) threads = static_cast<int>(count);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  const int64_t chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int64_t lo = begin + t * chunk;
    const int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &f] {
      for (int64_t i = lo; i < hi; ++i) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace geadv
