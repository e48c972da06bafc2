#include "roughpde/error.hpp"

namespace roughpde {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::step_mismatch: return "step_mismatch";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::not_lie_element: return "not_lie_element";
    case ErrorCode::non_monotone_times: return "non_monotone_times";
    case ErrorCode::not_on_grid: return "not_on_grid";
    case ErrorCode::factorization_failed: return "factorization_failed";
    case ErrorCode::blow_up: return "blow_up";
    case ErrorCode::singular_jacobian: return "singular_jacobian";
    case ErrorCode::linear_solve_failed: return "linear_solve_failed";
    case ErrorCode::cfl_violation: return "cfl_violation";
    case ErrorCode::config_error: return "config_error";
    case ErrorCode::io_error: return "io_error";
  }
  return "unknown";
}

}  // namespace roughpde
