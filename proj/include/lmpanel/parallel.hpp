#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lmpanel {

inline std::atomic<int> g_max_threads{0}; // 0 = hardware concurrency

inline int max_threads() {
  const int cap = g_max_threads.load();
  if (cap > 0) return cap;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline void set_max_threads(int n) { g_max_threads.store(n); }

namespace detail {
inline thread_local bool in_parallel_worker = false;
}

// Calls f(i) exactly once for every i in [0, n). Each index writes only its
// own output slot, so results do not depend on the thread count. Nested
// calls run serially.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
  const int workers =
      detail::in_parallel_worker ? 1 : std::min<std::size_t>(max_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error = nullptr;
  std::atomic<bool> failed{false};
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&]() {
      detail::in_parallel_worker = true;
      std::size_t i;
      while ((i = next.fetch_add(1)) < n && !failed.load()) {
        try {
          f(i);
        } catch (...) {
          if (!failed.exchange(true)) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

} // namespace lmpanel
