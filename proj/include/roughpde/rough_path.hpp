#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "roughpde/execution.hpp"
#include "roughpde/group_element.hpp"

namespace roughpde {

// R^d-valued samples of a path at strictly increasing times, row-major.
struct SampledPath {
  int dim = 1;
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const noexcept { return times.size(); }
  std::span<const double> at(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
  std::span<double> at(std::size_t i) { return std::span<double>(values).subspan(i * dim, dim); }
};

// A weak geometric p-rough path known on a time grid t_0 = 0 < ... < t_M = T.
// Points are absolute (x_0 is the identity); increments follow from Chen's
// relation x_{s,t} = x_s^{-1} x_t.
class RoughPathGrid {
 public:
  RoughPathGrid(std::vector<double> times, std::vector<GroupElement> points, double p);

  int dim() const noexcept { return points_.front().dim(); }
  int step() const noexcept { return points_.front().step(); }
  double p() const noexcept { return p_; }
  double holder_exponent() const noexcept { return 1.0 / p_; }

  std::size_t size() const noexcept { return times_.size(); }
  std::size_t segments() const noexcept { return times_.size() - 1; }
  double horizon() const noexcept { return times_.back(); }

  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<GroupElement>& points() const& noexcept { return points_; }
  std::vector<GroupElement> points() && { return std::move(points_); }
  const GroupElement& point(std::size_t i) const { return points_[i]; }

  GroupElement increment(std::size_t i, std::size_t j) const;

  // Index of grid time t (exact match up to 1e-12 relative to the horizon).
  std::size_t index_of(double t) const;
  bool on_grid(double t) const noexcept;

 private:
  std::vector<double> times_;
  std::vector<GroupElement> points_;
  double p_;
};

// Exact step-N signature of the piecewise-linear interpolant, stored at every
// `stride`-th sample (the last sample is always kept). p defaults to the step.
RoughPathGrid lift_piecewise_linear(const SampledPath& path, int step, double p = 0.0,
                                    std::size_t stride = 1);

double holder_norm(const RoughPathGrid& x, Execution exec = Execution::parallel);
double holder_distance(const RoughPathGrid& x, const RoughPathGrid& y,
                       Execution exec = Execution::parallel);
double uniform_distance(const RoughPathGrid& x, const RoughPathGrid& y);

// Path s -> x_t^{-1} x_{t-s} on [0, t]; t must be a grid time.
RoughPathGrid time_reverse(const RoughPathGrid& x, double t);

// Prefix of x on [0, t]; t must be a grid time.
RoughPathGrid restrict_to(const RoughPathGrid& x, double t);

// Interpolates each segment along exp(lambda * log x_{t_i, t_{i+1}}). The new
// grid must share both endpoints with the old one.
RoughPathGrid resample(const RoughPathGrid& x, std::span<const double> new_times);

RoughPathGrid dilate_path(double eps, const RoughPathGrid& x);

// Level-1 component of every point, i.e. the underlying R^d path.
SampledPath level_one_path(const RoughPathGrid& x);

void write_csv(std::ostream& out, const RoughPathGrid& x);
void write_csv(const std::string& filename, const RoughPathGrid& x);
// p <= 0 selects p = step inferred from the header.
RoughPathGrid read_csv(std::istream& in, double p = 0.0);
RoughPathGrid read_csv_file(const std::string& filename, double p = 0.0);

// Finite-energy path h, interpolated linearly between knots.
class CameronMartinPath {
 public:
  explicit CameronMartinPath(SampledPath knots);

  const SampledPath& knots() const noexcept { return knots_; }
  int dim() const noexcept { return knots_.dim; }

  // 1/2 int |h'|^2 dt, exact for the piecewise-linear interpolant.
  double energy() const;

  // Piecewise-linear interpolation onto the given times.
  SampledPath sample(std::span<const double> times) const;

 private:
  SampledPath knots_;
};

}  // namespace roughpde
