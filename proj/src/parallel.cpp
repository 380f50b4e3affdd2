#include "lqmf/parallel.hpp"

#include <algorithm>
#include <exception>
#include <mutex>

namespace lqmf {

namespace {
std::atomic<int> g_jobs{0};  // 0 = not set yet, use hardware concurrency
}

int max_jobs() {
  int j = g_jobs.load(std::memory_order_relaxed);
  if (j > 0) return j;
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

void set_max_jobs(int jobs) { g_jobs.store(jobs > 0 ? jobs : 0, std::memory_order_relaxed); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int jobs = std::min<std::size_t>(static_cast<std::size_t>(max_jobs()), n);
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n, std::memory_order_relaxed);  // drain remaining work
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs - 1);
  for (int t = 0; t < jobs - 1; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace lqmf
