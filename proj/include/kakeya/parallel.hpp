#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace kakeya {

// Worker count from KAKEYA_LAB_WORKERS, defaulting to 1.
inline int default_workers() {
  const char* env = std::getenv("KAKEYA_LAB_WORKERS");
  if (!env || !*env) return 1;
  try {
    return std::max(1, std::stoi(env));
  } catch (...) {
    return 1;
  }
}

// Evaluates fn(0..n-1) on up to `workers` threads. Results land in index
// order, so the output does not depend on the worker count.
template <class R, class F>
std::vector<R> parallel_map(std::size_t n, int workers, F&& fn) {
  std::vector<R> out(n);
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  int k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), n));
  for (int w = 0; w < k; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace kakeya
