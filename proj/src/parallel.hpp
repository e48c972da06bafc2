#pragma once

#include <cstddef>
#include <exception>

#include "roughpde/execution.hpp"

namespace roughpde::detail {

// Runs body(i) for i in [0, n). Under Execution::parallel the iterations are
// distributed with OpenMP; the first exception thrown by any iteration is
// rethrown on the calling thread.
template <class Body>
void for_each_index(Execution exec, std::ptrdiff_t n, Body&& body) {
  if (exec == Execution::serial || n < 2) {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(roughpde_for_each_index)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace roughpde::detail
