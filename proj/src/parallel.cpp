#include "efric/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace efric {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) { g_threads = std::max(1, n); }

int thread_count() { return g_threads; }

void parallel_for(long n, const std::function<void(long)>& body) {
  int nt = int(std::min<long>(g_threads.load(), n));
  if (nt <= 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr err;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  long chunk = (n + nt - 1) / nt;
  for (int t = 0; t < nt; ++t) {
    long lo = t * chunk, hi = std::min(n, lo + chunk);
    pool.emplace_back([&, lo, hi] {
      try {
        for (long i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace efric
