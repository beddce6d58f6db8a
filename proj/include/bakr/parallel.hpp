#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "bakr/common.hpp"

namespace bakr {

// Runs fn(0..count-1) over a worker pool. Jobs must be independent; callers
// keep determinism by deriving any randomness from the job index and writing
// results into preallocated slots.
inline void parallel_for(Index count, int threads,
                         const std::function<void(Index)>& fn) {
  if (count <= 0) return;
  if (threads <= 1 || count == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const Index i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };

  const int pool_size = static_cast<int>(
      std::min<Index>(count, static_cast<Index>(threads)));
  std::vector<std::thread> pool;
  pool.reserve(pool_size);
  for (int t = 0; t < pool_size; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace bakr
