#include "rawsat/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rawsat {
namespace {

std::atomic<unsigned> g_threads{0};

}  // namespace

void set_thread_count(unsigned n) { g_threads.store(n, std::memory_order_relaxed); }

unsigned thread_count() {
  const unsigned n = g_threads.load(std::memory_order_relaxed);
  if (n != 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_grain) {
  if (n == 0) return;
  min_grain = std::max<std::size_t>(min_grain, 1);
  const std::size_t max_chunks = (n + min_grain - 1) / min_grain;
  const std::size_t workers = std::min<std::size_t>(thread_count(), max_chunks);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&](std::size_t b, std::size_t e) {
    try {
      fn(b, e);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back(run, b, e);
  }
  run(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace rawsat
