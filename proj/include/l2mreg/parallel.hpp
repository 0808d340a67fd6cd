#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace l2mreg {

/// Runs task(i) for i in [0, count) on up to `workers` threads. Tasks are
/// claimed dynamically, so callers must write results by index. The first
/// exception thrown by any task is rethrown after all threads join.
template <typename Task>
void parallel_for(std::size_t count, unsigned workers, Task&& task) {
  const std::size_t n_threads =
      std::min<std::size_t>(std::max(1u, workers), count);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(n_threads - 1);
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(run);
  run();
  for (auto& th : threads) th.join();
  if (error) std::rethrow_exception(error);
}

/// Splits [0, count) into `chunks` contiguous ranges (begin, end).
inline std::vector<std::pair<std::size_t, std::size_t>> split_range(
    std::size_t count, std::size_t chunks) {
  chunks = std::max<std::size_t>(1, std::min(chunks, count));
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t c = 0; c < chunks; ++c) {
    out.emplace_back(count * c / chunks, count * (c + 1) / chunks);
  }
  return out;
}

}  // namespace l2mreg
