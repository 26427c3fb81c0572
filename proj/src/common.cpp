#include "cfrf/common.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>

namespace cfrf {

void Dataset::validate() const {
  if (n() < 2) throw ConfigError("dataset needs at least 2 rows");
  if (p() < 1) throw ConfigError("dataset needs at least 1 covariate");
  if (t.size() != n() || y.size() != n())
    throw ConfigError("treatment/outcome length does not match covariate rows");
  for (std::size_t j = 0; j < p(); ++j) {
    const double* c = x.col(j);
    for (std::size_t i = 0; i < n(); ++i)
      if (!std::isfinite(c[i]))
        throw IngestionError("non-finite covariate at row " + std::to_string(i) +
                             ", column " + std::to_string(j));
  }
  for (std::size_t i = 0; i < n(); ++i) {
    if (t[i] != 0 && t[i] != 1)
      throw IngestionError("treatment must be 0/1, got " + std::to_string(t[i]) +
                           " at row " + std::to_string(i));
    bool y_needed = missing_mask.empty() || missing_mask[i][t[i]];
    if (y_needed && !std::isfinite(y[i]))
      throw IngestionError("non-finite outcome at row " + std::to_string(i));
  }
}

namespace {
std::atomic<unsigned> g_threads{0};
std::mutex g_log_mutex;
thread_local bool g_in_worker = false;
}  // namespace

void set_thread_count(unsigned n) { g_threads.store(n); }

unsigned thread_count() {
  unsigned n = g_threads.load();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  unsigned workers = std::min<std::size_t>(thread_count(), n);
  if (g_in_worker) workers = 1;  // nested loops run serial inside a worker
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      g_in_worker = true;
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

void log_warning(const std::string& msg) {
  std::lock_guard lock(g_log_mutex);
  std::cerr << "warning: " << msg << "\n";
}

}  // namespace cfrf
