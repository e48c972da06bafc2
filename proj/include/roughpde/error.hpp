#pragma once

#include <stdexcept>
#include <string>

namespace roughpde {

enum class ErrorCode {
  dimension_mismatch,
  step_mismatch,
  invalid_argument,
  not_lie_element,
  non_monotone_times,
  not_on_grid,
  factorization_failed,
  blow_up,
  singular_jacobian,
  linear_solve_failed,
  cfl_violation,
  config_error,
  io_error,
};

const char* to_string(ErrorCode code) noexcept;

// Structured failure carrying a machine-checkable code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the RDE solvers when the state leaves the admissible region.
class BlowUpError : public Error {
 public:
  BlowUpError(double time, const std::string& what)
      : Error(ErrorCode::blow_up, what), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace roughpde
