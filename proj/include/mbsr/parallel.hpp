#pragma once

#include <cstddef>
#include <exception>

namespace mbsr {

/// OpenMP loop over [0, n) that forwards the first exception thrown by any
/// iteration to the caller instead of terminating.
template <typename Fn>
void parallel_for(std::ptrdiff_t n, Fn&& fn) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical(mbsr_parallel_for_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace mbsr
