#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace spfu {

namespace detail {
inline std::atomic<std::size_t>& thread_override() {
  static std::atomic<std::size_t> value{0};
  return value;
}
}  // namespace detail

/// Worker count for internal loops. An explicit set_thread_count() wins;
/// otherwise SPFU_THREADS is read (0 or unset = hardware concurrency).
inline std::size_t thread_count() {
  if (std::size_t n = detail::thread_override().load(); n > 0) return n;
  std::size_t n = 0;
  if (const char* env = std::getenv("SPFU_THREADS"); env != nullptr && *env != '\0') {
    try {
      n = static_cast<std::size_t>(std::stoul(env));
    } catch (...) {
      n = 0;
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

inline void set_thread_count(std::size_t n) { detail::thread_override().store(n); }

/// Runs body(i) for i in [0, count). Iterations are split into contiguous
/// chunks; each iteration must only write state owned by i, so results do not
/// depend on scheduling.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t workers = std::min(thread_count(), count);
  if (workers <= 1 || count < 64) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] {
      for (std::size_t i = begin; i < end; ++i) body(i);
    });
  }
}

}  // namespace spfu
