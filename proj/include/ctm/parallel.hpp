#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ctm {

/// Number of worker threads used by parallel_for; 0 means hardware concurrency.
inline std::size_t& parallel_thread_override() {
  static std::size_t value = 0;
  return value;
}

inline std::size_t worker_count(std::size_t jobs) {
  std::size_t n = parallel_thread_override();
  if (n == 0) n = std::max<unsigned>(1, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

/// Runs body(i) for i in [0, count). Each index is visited exactly once;
/// callers write results into per-index slots so the outcome does not depend
/// on scheduling. The first exception thrown by any body is rethrown.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t workers = worker_count(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ctm
