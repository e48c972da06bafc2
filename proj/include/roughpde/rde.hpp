#pragma once

#include <span>
#include <vector>

#include "roughpde/group_element.hpp"
#include "roughpde/rough_path.hpp"
#include "roughpde/vector_fields.hpp"

namespace roughpde {

struct RdeOptions {
  // Each grid increment g is applied as `substeps` equal pieces exp(log(g) / K).
  int substeps = 1;
  // Step of the scheme; 0 uses the driver's step. A larger value extends every
  // piece geodesically, exp(log(g)) computed in the higher step.
  int scheme_step = 0;
  // Hard error once |y|_inf exceeds this bound.
  double blow_up_threshold = 1e8;
};

// Grid increments of a rough path, ready to be consumed by the step-N scheme.
struct DriverIncrements {
  int dim = 0;
  int step = 0;
  std::vector<double> times;         // grid times t_0..t_M
  std::vector<GroupElement> steps;   // x_{t_k, t_{k+1}}, already split into sub-steps
  int substeps = 1;
};

DriverIncrements increments_of(const RoughPathGrid& x, int substeps = 1, int scheme_step = 0);
// Increments of time_reverse(x, t) without materialising the reversed path.
DriverIncrements reversed_increments_of(const RoughPathGrid& x, double t, int substeps = 1,
                                        int scheme_step = 0);

struct Trajectory {
  int dim = 0;
  std::vector<double> times;
  std::vector<double> states;  // row-major, times.size() x dim

  std::span<const double> at(std::size_t i) const& {
    return std::span<const double>(states).subspan(i * dim, dim);
  }
  std::span<const double> back() const& { return at(times.size() - 1); }
  // Views into a temporary would dangle.
  std::span<const double> at(std::size_t) && = delete;
  std::span<const double> back() && = delete;
};

// Flow value with first and second derivatives in the initial point:
// jacobian(a, k) = d pi^a / d y^k, hessian(a, k, l) = d^2 pi^a / d y^k d y^l.
struct FlowJet {
  int dim = 0;
  std::vector<double> point;
  std::vector<double> jacobian;
  std::vector<double> hessian;

  static FlowJet initial(std::span<const double> y);

  double jac(int a, int k) const { return jacobian[a * dim + k]; }
  double hess(int a, int k, int l) const { return hessian[(a * dim + k) * dim + l]; }

  // 2-norm condition number of the Jacobian (exact for dim <= 2, Frobenius
  // based bound otherwise).
  double condition_number() const;
};

// One grid increment of the scheme (applied `substeps` times) to a state or a
// jet. Used by batched solvers that advance many points in lockstep.
void advance_state(const VectorFieldSet& v, const GroupElement& s, int substeps,
                   std::vector<double>& y);
void advance_jet(const VectorFieldSet& v, const GroupElement& s, int substeps, FlowJet& jet);

// Step-N Euler scheme on signature coordinates:
// y <- y + sum_{1 <= |w| <= N} (V_{w_1} ... V_{w_n} I)(y) x^w over every increment.
Trajectory solve_rde(const VectorFieldSet& v, std::span<const double> y0, const RoughPathGrid& x,
                     const RdeOptions& options = {});
Trajectory solve_rde(const VectorFieldSet& v, std::span<const double> y0,
                     const DriverIncrements& steps, const RdeOptions& options = {});
std::vector<double> solve_rde_endpoint(const VectorFieldSet& v, std::span<const double> y0,
                                       const DriverIncrements& steps,
                                       const RdeOptions& options = {});

// First and second derivatives of the discrete flow in the initial point,
// propagated through every scheme step; one jet per grid time.
std::vector<FlowJet> solve_rde_jet(const VectorFieldSet& v, std::span<const double> y0,
                                   const RoughPathGrid& x, const RdeOptions& options = {});
std::vector<FlowJet> solve_rde_jet(const VectorFieldSet& v, std::span<const double> y0,
                                   const DriverIncrements& steps, const RdeOptions& options = {});

// pi(0, . ; x)_t^{-1}(y), computed as the flow driven by time_reverse(x, t).
std::vector<double> inverse_flow(const VectorFieldSet& v, std::span<const double> y,
                                 const RoughPathGrid& x, double t, const RdeOptions& options = {});

// Batched inverse flows at one time over many points (row-major input).
std::vector<double> inverse_flow_batch(const VectorFieldSet& v, std::span<const double> points,
                                       const RoughPathGrid& x, double t,
                                       const RdeOptions& options = {},
                                       Execution exec = Execution::parallel);

void write_trajectory_csv(const std::string& filename, const Trajectory& trajectory);

}  // namespace roughpde
