#include "bdsde/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bdsde {

namespace {

int env_default() {
  if (const char* env = std::getenv("BDSDE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<int>(v);
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
#endif
}

std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{env_default()};
  return cap;
}

}  // namespace

int max_threads() { return thread_cap().load(std::memory_order_relaxed); }

void set_max_threads(int n) {
  thread_cap().store(n < 1 ? 1 : n, std::memory_order_relaxed);
}

namespace detail {

void omp_run(std::size_t n, void* ctx, void (*body)(void*, std::size_t)) {
#ifdef _OPENMP
  // Exceptions may not escape an OpenMP region: capture the first one and
  // rethrow after the join. Remaining iterations become no-ops.
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::atomic<bool> failed{false};
  const int nt = max_threads();
#pragma omp parallel for num_threads(nt) schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      body(ctx, static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
      failed.store(true, std::memory_order_relaxed);
    }
  }
  if (failure) std::rethrow_exception(failure);
#else
  for (std::size_t i = 0; i < n; ++i) body(ctx, i);
#endif
}

}  // namespace detail

}  // namespace bdsde
