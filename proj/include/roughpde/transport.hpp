#pragma once

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "roughpde/execution.hpp"
#include "roughpde/rde.hpp"
#include "roughpde/rough_path.hpp"
#include "roughpde/vector_fields.hpp"

namespace roughpde {

enum class DatumClass { bounded_c1, buc, ck, unbounded };

// Initial condition phi with its gradient.
struct InitialDatum {
  std::string name;
  int dim = 1;
  DatumClass kind = DatumClass::bounded_c1;
  std::function<double(std::span<const double>)> value;
  std::function<void(std::span<const double>, std::span<double>)> gradient;
  // inf and sup of phi over R^e.
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool bounded() const noexcept { return kind != DatumClass::unbounded; }
};

// Presets: gaussian (width), tanh (scale), constant (c), sine (freq),
// quadratic (unbounded). The gradient is checked against central differences
// (h = 1e-4, tolerance 1e-5) before the datum is returned.
InitialDatum make_initial_datum(const std::string& name, int dim,
                                const std::map<std::string, double>& params = {});
double gradient_check_error(const InitialDatum& phi, const std::vector<std::vector<double>>& probes,
                            double h = 1e-4);

// Uniform tensor grid on the box [lo, hi]; nodes are ordered lexicographically
// with the first axis slowest.
struct SpaceGrid {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<int> nodes;

  static SpaceGrid uniform(int dim, double lo, double hi, double spacing);

  int dim() const noexcept { return static_cast<int>(nodes.size()); }
  std::size_t size() const;
  double spacing(int axis) const { return (hi[axis] - lo[axis]) / (nodes[axis] - 1); }
  double coordinate(int axis, int j) const;
  void point(std::size_t flat, std::span<double> out) const;
  std::vector<double> points() const;  // row-major size() x dim
};

// Space-time samples u(t_i, y_j).
struct ScalarField {
  SpaceGrid space;
  std::vector<double> times;
  std::vector<double> values;  // time-major, then space order

  std::span<const double> at_time(std::size_t i) const {
    return std::span<const double>(values).subspan(i * space.size(), space.size());
  }
  std::span<double> at_time(std::size_t i) {
    return std::span<double>(values).subspan(i * space.size(), space.size());
  }
};

// Header `t,y_1..y_e,u`, rows time-major then lexicographic in space.
void write_scalar_field_csv(std::ostream& out, const ScalarField& field);
void write_scalar_field_csv(const std::string& filename, const ScalarField& field);

// Sup-norm of the difference of two fields on identical grids.
double sup_distance(const ScalarField& a, const ScalarField& b);

// u(t, y) = phi(pi(0, y; time_reverse(x, t))_t) for every output time (each a
// grid time of x) and every node.
ScalarField solve_transport(const VectorFieldSet& v, const InitialDatum& phi,
                            const RoughPathGrid& x, std::span<const double> output_times,
                            const SpaceGrid& grid, const RdeOptions& options = {},
                            Execution exec = Execution::parallel);

// sup |Pi(0, phi; x) - Pi(0, phi; x_perturbed)| over the output grid.
double solution_map_modulus(const VectorFieldSet& v, const InitialDatum& phi,
                            const RoughPathGrid& x, const RoughPathGrid& x_perturbed,
                            std::span<const double> output_times, const SpaceGrid& grid,
                            const RdeOptions& options = {});

}  // namespace roughpde
