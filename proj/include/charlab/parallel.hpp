#pragma once

#include <algorithm>
#include <atomic>
#include <complex>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

#include "charlab/numeric.hpp"

namespace charlab {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};
  return cap;
}
}  // namespace detail

// 0 means "use std::thread::hardware_concurrency()".
inline void set_max_threads(unsigned n) { detail::thread_cap().store(n); }

inline unsigned max_threads() {
  const unsigned cap = detail::thread_cap().load();
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return cap == 0 ? hw : cap;
}

// Calls fn(i) for every i in [0, n). Work is handed out dynamically, so
// callers must write results by index and reduce afterwards in index order;
// that keeps every result independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(max_threads(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline constexpr std::size_t reduction_block = 8192;

// Sum of term(i) over [0, n): compensated within fixed-size blocks, block
// partials combined in index order. Same bits for any thread count.
template <typename T, typename Fn>
T blocked_sum(std::size_t n, Fn&& term) {
  const std::size_t blocks = (n + reduction_block - 1) / reduction_block;
  std::vector<T> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * reduction_block;
    const std::size_t hi = std::min(n, lo + reduction_block);
    if constexpr (std::is_same_v<T, double>) {
      NeumaierSum s;
      for (std::size_t i = lo; i < hi; ++i) s.add(term(i));
      partial[b] = s.value();
    } else {
      ComplexNeumaierSum s;
      for (std::size_t i = lo; i < hi; ++i) s.add(term(i));
      partial[b] = s.value();
    }
  });
  if constexpr (std::is_same_v<T, double>) {
    NeumaierSum s;
    for (const auto& v : partial) s.add(v);
    return s.value();
  } else {
    ComplexNeumaierSum s;
    for (const auto& v : partial) s.add(v);
    return s.value();
  }
}

}  // namespace charlab
