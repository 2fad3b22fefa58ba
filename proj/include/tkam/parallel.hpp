#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tkam {

// Number of worker threads used by the parallel stages. 0 selects
// std::thread::hardware_concurrency().
inline unsigned& thread_count() {
  static unsigned n = 1;
  return n;
}

inline unsigned effective_threads() {
  unsigned n = thread_count();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

// Static contiguous partition of [0, n). Each index is visited exactly once
// and the body must only write to storage owned by that index, so results do
// not depend on the schedule. The body receives (index, worker id).
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(effective_threads(), std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i, 0u);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t begin = n * w / workers;
      const std::size_t end = n * (w + 1) / workers;
      try {
        for (std::size_t i = begin; i < end; ++i) body(i, w);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

} // namespace tkam
