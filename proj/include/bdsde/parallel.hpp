#pragma once

#include <cstddef>

namespace bdsde {

// Execution mode for the hot kernels. `serial` is the reference
// implementation kept for testing and benchmarking; `parallel` runs the
// same per-index body under OpenMP. Kernels only ever write to disjoint
// output slots and all reductions are done afterwards in a fixed order,
// so both modes produce byte-identical results.
enum class ExecMode { serial, parallel };

// Worker cap. Defaults to the hardware thread count, overridable by the
// BDSDE_THREADS environment variable (read once) or set_max_threads().
int max_threads();
void set_max_threads(int n);

namespace detail {
void omp_run(std::size_t n, void* ctx, void (*body)(void*, std::size_t));
}

// Reference driver: plain sequential loop.
template <class F>
void serial_for(std::size_t n, F&& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

// OpenMP driver with static schedule. Falls back to serial_for when built
// without OpenMP or when the worker cap is 1.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  if (n < 2 || max_threads() < 2) {
    serial_for(n, body);
    return;
  }
  detail::omp_run(n, &body, [](void* ctx, std::size_t i) {
    (*static_cast<F*>(ctx))(i);
  });
}

template <class F>
void run_indexed(std::size_t n, ExecMode mode, F&& body) {
  if (mode == ExecMode::parallel)
    parallel_for(n, static_cast<F&&>(body));
  else
    serial_for(n, static_cast<F&&>(body));
}

}  // namespace bdsde
