#pragma once

// Minimal fork-join helper. Work is always split into the same index-addressed
// tasks whatever the worker count; callers write results into per-index slots
// and reduce them in index order, so output never depends on scheduling.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace treepoly {

namespace detail {
inline std::atomic<int>& jobs_setting() {
  static std::atomic<int> jobs{0};
  return jobs;
}
inline thread_local bool in_parallel_region = false;
}  // namespace detail

/// Worker count for parallel_for; 0 means hardware concurrency.
inline void set_jobs(int jobs) { detail::jobs_setting().store(std::max(jobs, 0)); }

inline int jobs() {
  const int j = detail::jobs_setting().load();
  if (j > 0) return j;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Calls fn(i) for i in [0, count). Nested calls run inline.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(jobs()), count);
  if (workers <= 1 || detail::in_parallel_region) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    detail::in_parallel_region = true;
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
    detail::in_parallel_region = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace treepoly
