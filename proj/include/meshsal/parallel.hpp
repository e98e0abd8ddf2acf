#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace meshsal {

namespace detail {
inline std::atomic<unsigned>& thread_count_ref() {
  static std::atomic<unsigned> count{std::max(1u, std::thread::hardware_concurrency())};
  return count;
}
}  // namespace detail

/// Worker count used by every parallel section. Results never depend on it.
inline unsigned thread_count() { return detail::thread_count_ref().load(); }
inline void set_thread_count(unsigned n) { detail::thread_count_ref().store(std::max(1u, n)); }

/// Runs body(i) for i in [0, n) over contiguous static chunks. Each index must
/// only write state owned by that index, so the outcome is independent of the
/// worker count. The first exception thrown by any worker is rethrown.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace meshsal
