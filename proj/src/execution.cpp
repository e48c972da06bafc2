#include "roughpde/execution.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace roughpde {

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace roughpde
