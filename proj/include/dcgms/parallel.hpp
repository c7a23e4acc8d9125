#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dcgms {

/// Runs fn(k) for k in [0, n) on up to `threads` workers (0 = hardware concurrency).
/// The first exception thrown by any task is rethrown on the calling thread.
template <class Fn>
void parallel_for(int n, Fn&& fn, int threads = 0)
{
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int k = 0; k < n; ++k) fn(k);
    return;
  }

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int k = next++; k < n; k = next++) {
      try {
        fn(k);
      }
      catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

} // namespace dcgms
