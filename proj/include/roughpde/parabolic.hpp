#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "roughpde/execution.hpp"
#include "roughpde/rde.hpp"
#include "roughpde/rough_path.hpp"
#include "roughpde/transport.hpp"
#include "roughpde/vector_fields.hpp"

namespace roughpde {

// L_t = 1/2 a^{ij}(t, .) d_i d_j + b^i(t, .) d_i with a symmetric and
// uniformly elliptic.
struct EllipticCoefficients {
  std::string name;
  int dim = 1;
  // a written row-major into an e*e span.
  std::function<void(double, std::span<const double>, std::span<double>)> diffusion;
  std::function<void(double, std::span<const double>, std::span<double>)> drift;
  double ellipticity = 1.0;
  double holder_exponent = 1.0;
  double holder_constant = 0.0;
};

// Presets:
//   heat      a = sigma^2 I, b = mu (every component)
//   variable  e = 1: a = sigma^2 (1.5 + 0.5 sin(y + t)), b = mu cos(y)
//             e = 2: a = sigma^2 [[1.5 + 0.5 sin(y1 + t), 0.3], [0.3, 1.5 + 0.5 cos(y2)]],
//                    b = mu (cos y1, sin y2)
EllipticCoefficients make_coefficients(const std::string& name, int dim,
                                       const std::map<std::string, double>& params = {});

struct CoefficientReport {
  double symmetry_defect = 0.0;
  double min_eigenvalue = 0.0;       // over probes
  double holder_ratio_max = 0.0;     // sup |a(p)-a(q)| / (|y-y'|^beta + |t-t'|^(beta/2))
  bool ok = false;
};

// Symmetry, ellipticity and a Hoelder spot check on random probe pairs drawn
// from [0, horizon] x [lo, hi]^e.
CoefficientReport validate_coefficients(const EllipticCoefficients& c, double horizon, double lo,
                                        double hi, int probes = 200, std::uint64_t seed = 1);

// Smallest eigenvalue of a symmetric e x e matrix (e <= 2 closed form).
double min_eigenvalue(std::span<const double> a, int e);

// Coefficients at every grid node, consumed by the theta-scheme in time order.
class CoefficientSource {
 public:
  virtual ~CoefficientSource() = default;
  // Values at t_k + fraction (t_{k+1} - t_k); calls arrive with nondecreasing k.
  virtual void evaluate(std::size_t segment, double fraction, std::vector<double>& a,
                        std::vector<double>& b) = 0;
};

// a(t, y), b(t, y) at the nodes of `space` on the time grid `times`.
class PlainCoefficientSource final : public CoefficientSource {
 public:
  PlainCoefficientSource(const EllipticCoefficients& c, const SpaceGrid& space,
                         std::vector<double> times, Execution exec = Execution::parallel);
  void evaluate(std::size_t segment, double fraction, std::vector<double>& a,
                std::vector<double>& b) override;

 private:
  const EllipticCoefficients& c_;
  std::vector<double> points_;
  std::vector<double> times_;
  Execution exec_;
};

// a_x, b_x on `space` at the grid times of x. Forward jets of every node are
// advanced in lockstep with the driver so memory stays O(nodes).
class TransformedCoefficientSource final : public CoefficientSource {
 public:
  TransformedCoefficientSource(const EllipticCoefficients& c, const VectorFieldSet& v,
                               const RoughPathGrid& x, const SpaceGrid& space,
                               const RdeOptions& options = {},
                               Execution exec = Execution::parallel);
  void evaluate(std::size_t segment, double fraction, std::vector<double>& a,
                std::vector<double>& b) override;

  // Coefficients at grid index k (advances the jets if needed).
  void at_index(std::size_t k, std::vector<double>& a, std::vector<double>& b);

  // Per grid time, filled as indices are reached (NaN before).
  const std::vector<double>& ellipticity() const { return ellipticity_; }
  const std::vector<double>& condition() const { return condition_; }

 private:
  void advance_to(std::size_t k);
  void assemble();

  const EllipticCoefficients& c_;
  const VectorFieldSet& v_;
  DriverIncrements steps_;
  SpaceGrid space_;
  RdeOptions options_;
  Execution exec_;
  std::vector<FlowJet> jets_;
  std::size_t index_ = 0;
  std::vector<double> a_left_, b_left_, a_right_, b_right_;
  std::size_t left_index_ = static_cast<std::size_t>(-1);
  std::size_t right_index_ = static_cast<std::size_t>(-1);
  std::vector<double> a_cur_, b_cur_;
  std::vector<double> ellipticity_;
  std::vector<double> condition_;
};

// Gridded a_x, b_x at the selected output times.
struct TransformedCoefficients {
  SpaceGrid space;
  std::vector<double> times;
  std::vector<double> a;            // times x nodes x e x e
  std::vector<double> b;            // times x nodes x e
  std::vector<double> ellipticity;  // per output time, min over nodes
  std::vector<double> condition;    // per output time, max cond(D xi) over nodes

  double ellipticity_lower_bound() const;
  double symmetry_defect() const;
};

TransformedCoefficients transform_coefficients(const EllipticCoefficients& c,
                                               const VectorFieldSet& v, const RoughPathGrid& x,
                                               const SpaceGrid& space,
                                               std::span<const double> output_times,
                                               const RdeOptions& options = {},
                                               Execution exec = Execution::parallel);

// max over probes y of |D zeta(xi(t,y)) D xi(y) - I|_max, with D zeta taken
// from an independent jet solve on the reversed driver.
double jacobian_duality_residual(const VectorFieldSet& v, const RoughPathGrid& x, double t,
                                 std::span<const double> probes, const RdeOptions& options = {});

enum class BoundaryCondition { dirichlet, neumann };
BoundaryCondition parse_boundary(const std::string& name);

struct ParabolicOptions {
  double theta = 0.5;
  BoundaryCondition boundary = BoundaryCondition::dirichlet;
  // Each segment is split so that max |b| dt / h <= max_courant.
  double max_courant = 1.0;
  int max_substeps = 64;
};

struct ParabolicResult {
  ScalarField field;
  // max over steps of how far a solution value left [min phi, max phi].
  double range_slack = 0.0;
  int max_substeps_used = 1;
};

// Theta-scheme on the box of `space`, time grid `times` (t_0 = 0); records the
// solution at `output_times`, each of which must be a grid time.
ParabolicResult solve_parabolic(CoefficientSource& source, const InitialDatum& phi,
                                const SpaceGrid& space, std::span<const double> times,
                                std::span<const double> output_times,
                                const ParabolicOptions& options = {});

// Plain coefficients on a uniform time grid with step dt up to the last output time.
ScalarField solve_parabolic(const EllipticCoefficients& c, const InitialDatum& phi,
                            const SpaceGrid& space, double dt,
                            std::span<const double> output_times,
                            const ParabolicOptions& options = {});

struct DiagnosticsRow {
  double t = 0.0;
  double ellipticity_lower_bound = 0.0;
  double jacobian_cond_max = 1.0;
  double out_of_box_fraction = 0.0;
};

void write_diagnostics_csv(std::ostream& out, const std::vector<DiagnosticsRow>& rows);

struct SecondOrderResult {
  ScalarField u;                     // on the evaluation grid
  ScalarField v;                     // transformed solution on the solver box
  std::vector<DiagnosticsRow> diagnostics;
  double range_slack = 0.0;
  // Smallest distance of the zeta-image of the evaluation grid to the box
  // boundary, as a fraction of the box half-width.
  double margin_fraction = 1.0;
  bool margin_ok = true;
};

// u(t, y) = v(t, zeta(t, y)) where v solves dv/dt = L^x v on `solver_box`.
// Composition queries outside the box are clamped and counted.
SecondOrderResult solve_second_order_rpde(const EllipticCoefficients& c, const VectorFieldSet& v,
                                          const InitialDatum& phi, const RoughPathGrid& x,
                                          const SpaceGrid& solver_box,
                                          const SpaceGrid& evaluation,
                                          std::span<const double> output_times,
                                          const ParabolicOptions& options = {},
                                          const RdeOptions& rde = {},
                                          Execution exec = Execution::parallel);

// du = L u dt - grad u . V(y) dx directly, for a piecewise-linear driver
// (only level one of x is used). Result lives on `space`.
ScalarField solve_direct_lipschitz(const EllipticCoefficients& c, const VectorFieldSet& v,
                                   const InitialDatum& phi, const RoughPathGrid& x,
                                   const SpaceGrid& space, std::span<const double> output_times,
                                   const ParabolicOptions& options = {},
                                   Execution exec = Execution::parallel);

// Multilinear interpolation of one time slice; queries outside are clamped.
// Returns true if the query was inside the box.
bool interpolate(const SpaceGrid& space, std::span<const double> values,
                 std::span<const double> y, double& out);

// Field resampled on another grid by multilinear interpolation.
ScalarField resample_field(const ScalarField& field, const SpaceGrid& target);

}  // namespace roughpde
