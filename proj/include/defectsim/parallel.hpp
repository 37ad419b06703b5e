#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace defectsim {

namespace detail {
inline std::atomic<unsigned>& max_threads_setting() {
  static std::atomic<unsigned> value{0};
  return value;
}
}  // namespace detail

/// Caps worker parallelism for every library operation; 0 means hardware concurrency.
inline void set_max_threads(unsigned n) { detail::max_threads_setting() = n; }

inline unsigned max_threads() {
  const unsigned configured = detail::max_threads_setting();
  if (configured > 0) return configured;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(begin, end) over contiguous chunks of [0, count). Chunks never
/// share an index, so results are independent of scheduling as long as the
/// body only writes to its own indices.
template <typename Body>
void parallel_for_chunks(std::size_t count, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(max_threads(), count);
  if (workers <= 1) {
    if (count > 0) body(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  parallel_for_chunks(count, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) body(i);
  });
}

}  // namespace defectsim
