#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#include <omp.h>

namespace cc {

/// Runs fn(i) for i in [0, n) on the OpenMP team (serially when already inside a parallel
/// region). Each index must write only its own output slot. The first failing index's
/// exception (lowest i) is rethrown after the loop.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) if (!omp_in_parallel())
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace cc
