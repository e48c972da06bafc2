#include "roughpde/rough_path.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "parallel.hpp"
#include "roughpde/error.hpp"

namespace roughpde {

namespace {

constexpr double kGridTolerance = 1e-12;

void check_times(const std::vector<double>& times) {
  if (times.size() < 2) throw Error(ErrorCode::invalid_argument, "need at least two grid times");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw Error(ErrorCode::non_monotone_times,
                  "times not strictly increasing at index " + std::to_string(i));
    }
  }
}

void check_same_grid(const RoughPathGrid& x, const RoughPathGrid& y) {
  if (x.dim() != y.dim()) throw Error(ErrorCode::dimension_mismatch, "paths have different dimension");
  if (x.step() != y.step()) throw Error(ErrorCode::step_mismatch, "paths have different step");
  if (x.p() != y.p()) throw Error(ErrorCode::invalid_argument, "paths have different p");
  if (x.times() != y.times()) throw Error(ErrorCode::not_on_grid, "paths live on different grids");
}

std::vector<GroupElement> inverses(const RoughPathGrid& x) {
  std::vector<GroupElement> out;
  out.reserve(x.size());
  for (const auto& g : x.points()) out.push_back(inverse(g));
  return out;
}

}  // namespace

RoughPathGrid::RoughPathGrid(std::vector<double> times, std::vector<GroupElement> points, double p)
    : times_(std::move(times)), points_(std::move(points)), p_(p) {
  check_times(times_);
  if (times_.size() != points_.size()) {
    throw Error(ErrorCode::invalid_argument, "times and points differ in length");
  }
  if (times_.front() != 0.0) throw Error(ErrorCode::invalid_argument, "grid must start at t = 0");
  if (!(p_ >= 1.0) || static_cast<int>(std::floor(p_)) != points_.front().step()) {
    throw Error(ErrorCode::step_mismatch, "floor(p) must equal the group step");
  }
  for (const auto& g : points_) {
    if (g.dim() != points_.front().dim()) {
      throw Error(ErrorCode::dimension_mismatch, "points of mixed dimension");
    }
    if (g.step() != points_.front().step()) throw Error(ErrorCode::step_mismatch, "points of mixed step");
  }
  const GroupElement id = GroupElement::identity(dim(), step());
  if (coefficient_distance(points_.front(), id) > kGridTolerance) {
    throw Error(ErrorCode::invalid_argument, "path must start at the identity");
  }
}

GroupElement RoughPathGrid::increment(std::size_t i, std::size_t j) const {
  return multiply(inverse(points_[i]), points_[j]);
}

bool RoughPathGrid::on_grid(double t) const noexcept {
  const double tol = kGridTolerance * std::max(1.0, horizon());
  auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
  return it != times_.end() && std::abs(*it - t) <= tol;
}

std::size_t RoughPathGrid::index_of(double t) const {
  const double tol = kGridTolerance * std::max(1.0, horizon());
  auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
  if (it == times_.end() || std::abs(*it - t) > tol) {
    throw Error(ErrorCode::not_on_grid, "time " + std::to_string(t) + " is not a grid time");
  }
  return static_cast<std::size_t>(it - times_.begin());
}

RoughPathGrid lift_piecewise_linear(const SampledPath& path, int step, double p,
                                    std::size_t stride) {
  check_times(path.times);
  if (path.values.size() != path.times.size() * static_cast<std::size_t>(path.dim)) {
    throw Error(ErrorCode::dimension_mismatch, "sample values do not match dim * times");
  }
  if (path.times.front() != 0.0) throw Error(ErrorCode::invalid_argument, "path must start at t = 0");
  if (stride == 0) throw Error(ErrorCode::invalid_argument, "stride must be positive");
  if (p <= 0.0) p = step;

  const int d = path.dim;
  const std::size_t n = path.size();
  std::vector<double> times;
  std::vector<GroupElement> points;
  times.reserve((n - 1) / stride + 2);
  points.reserve((n - 1) / stride + 2);

  GroupElement running = GroupElement::identity(d, step);
  times.push_back(0.0);
  points.push_back(running);
  std::vector<double> delta(d);
  const auto origin = path.at(0);
  for (std::size_t i = 1; i < n; ++i) {
    const auto a = path.at(i - 1);
    const auto b = path.at(i);
    for (int k = 0; k < d; ++k) delta[k] = b[k] - a[k];
    running = multiply(running, segment_signature(delta, step));
    // Level 1 is the path increment itself; pin it to avoid summation drift.
    auto l1 = running.level(1);
    for (int k = 0; k < d; ++k) l1[k] = b[k] - origin[k];
    if (i % stride == 0 || i == n - 1) {
      times.push_back(path.times[i]);
      points.push_back(running);
    }
  }
  return RoughPathGrid(std::move(times), std::move(points), p);
}

double holder_norm(const RoughPathGrid& x, Execution exec) {
  const auto inv = inverses(x);
  const auto& t = x.times();
  const double alpha = x.holder_exponent();
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> row_max(n, 0.0);
  detail::for_each_index(exec, n, [&](std::ptrdiff_t i) {
    double best = 0.0;
    for (std::ptrdiff_t j = i + 1; j < n; ++j) {
      const double r = homogeneous_norm(multiply(inv[i], x.point(j))) / std::pow(t[j] - t[i], alpha);
      best = std::max(best, r);
    }
    row_max[i] = best;
  });
  return *std::max_element(row_max.begin(), row_max.end());
}

double holder_distance(const RoughPathGrid& x, const RoughPathGrid& y, Execution exec) {
  check_same_grid(x, y);
  const auto inv_x = inverses(x);
  const auto inv_y = inverses(y);
  const auto& t = x.times();
  const double alpha = x.holder_exponent();
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> row_max(n, 0.0);
  detail::for_each_index(exec, n, [&](std::ptrdiff_t i) {
    double best = 0.0;
    for (std::ptrdiff_t j = i + 1; j < n; ++j) {
      const GroupElement xij = multiply(inv_x[i], x.point(j));
      const GroupElement yij = multiply(inv_y[i], y.point(j));
      best = std::max(best, group_distance(xij, yij) / std::pow(t[j] - t[i], alpha));
    }
    row_max[i] = best;
  });
  return *std::max_element(row_max.begin(), row_max.end());
}

double uniform_distance(const RoughPathGrid& x, const RoughPathGrid& y) {
  check_same_grid(x, y);
  double best = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    best = std::max(best, group_distance(x.point(i), y.point(i)));
  }
  return best;
}

RoughPathGrid time_reverse(const RoughPathGrid& x, double t) {
  const std::size_t j = x.index_of(t);
  if (j == 0) throw Error(ErrorCode::not_on_grid, "reversal time must be positive");
  const double tj = x.times()[j];
  const GroupElement inv_end = inverse(x.point(j));
  std::vector<double> times(j + 1);
  std::vector<GroupElement> points;
  points.reserve(j + 1);
  times[0] = 0.0;
  points.push_back(GroupElement::identity(x.dim(), x.step()));
  for (std::size_t k = 1; k <= j; ++k) {
    times[k] = tj - x.times()[j - k];
    points.push_back(multiply(inv_end, x.point(j - k)));
  }
  return RoughPathGrid(std::move(times), std::move(points), x.p());
}

RoughPathGrid restrict_to(const RoughPathGrid& x, double t) {
  const std::size_t j = x.index_of(t);
  if (j == 0) throw Error(ErrorCode::not_on_grid, "restriction time must be positive");
  std::vector<double> times(x.times().begin(), x.times().begin() + j + 1);
  std::vector<GroupElement> points(x.points().begin(), x.points().begin() + j + 1);
  return RoughPathGrid(std::move(times), std::move(points), x.p());
}

RoughPathGrid resample(const RoughPathGrid& x, std::span<const double> new_times) {
  std::vector<double> times(new_times.begin(), new_times.end());
  check_times(times);
  if (times.front() != x.times().front() || times.back() != x.times().back()) {
    throw Error(ErrorCode::not_on_grid, "resampling grid must share both endpoints");
  }
  const auto& old = x.times();
  std::vector<GroupElement> points;
  points.reserve(times.size());
  std::size_t seg = 0;
  for (double s : times) {
    while (seg + 1 < old.size() - 1 && old[seg + 1] <= s) ++seg;
    if (s == old[seg]) {
      points.push_back(x.point(seg));
    } else if (s == old[seg + 1]) {
      points.push_back(x.point(seg + 1));
    } else {
      const double lambda = (s - old[seg]) / (old[seg + 1] - old[seg]);
      LieElement step_log = log(x.increment(seg, seg + 1));
      for (double& c : step_log.coefficients()) c *= lambda;
      points.push_back(
          multiply(x.point(seg), exp(step_log, std::numeric_limits<double>::infinity())));
    }
  }
  return RoughPathGrid(std::move(times), std::move(points), x.p());
}

RoughPathGrid dilate_path(double eps, const RoughPathGrid& x) {
  std::vector<GroupElement> points;
  points.reserve(x.size());
  for (const auto& g : x.points()) points.push_back(dilate(eps, g));
  return RoughPathGrid(x.times(), std::move(points), x.p());
}

SampledPath level_one_path(const RoughPathGrid& x) {
  SampledPath out;
  out.dim = x.dim();
  out.times = x.times();
  out.values.reserve(x.size() * x.dim());
  for (const auto& g : x.points()) {
    auto l1 = g.level(1);
    out.values.insert(out.values.end(), l1.begin(), l1.end());
  }
  return out;
}

namespace {

void append_number(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  line += buf;
}

std::string word_suffix(int dim, int level, std::size_t index) {
  std::string digits(level, '0');
  for (int k = level - 1; k >= 0; --k) {
    digits[k] = static_cast<char>('1' + index % dim);
    index /= dim;
  }
  return digits;
}

}  // namespace

void write_csv(std::ostream& out, const RoughPathGrid& x) {
  if (x.dim() > 9) throw Error(ErrorCode::invalid_argument, "CSV headers support d <= 9");
  std::string line = "t";
  for (int k = 1; k <= x.step(); ++k) {
    const std::size_t width = x.point(0).level(k).size();
    for (std::size_t w = 0; w < width; ++w) {
      line += ",level" + std::to_string(k) + "_" + word_suffix(x.dim(), k, w);
    }
  }
  out << line << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) {
    line.clear();
    append_number(line, x.times()[i]);
    for (double c : x.point(i).coefficients()) {
      line += ',';
      append_number(line, c);
    }
    out << line << '\n';
  }
}

void write_csv(const std::string& filename, const RoughPathGrid& x) {
  std::ofstream out(filename);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + filename);
  write_csv(out, x);
}

RoughPathGrid read_csv(std::istream& in, double p) {
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorCode::io_error, "empty rough path CSV");
  int dim = 0;
  int step = 0;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) {
      col.erase(0, col.find_first_not_of(" \t"));
      col.erase(col.find_last_not_of(" \t\r") + 1);
      if (col.rfind("level", 0) != 0) continue;
      const int level = col[5] - '0';
      step = std::max(step, level);
      if (level == 1) ++dim;
    }
  }
  if (dim == 0 || step == 0) throw Error(ErrorCode::io_error, "malformed rough path CSV header");
  if (p <= 0.0) p = step;
  std::vector<double> times;
  std::vector<GroupElement> points;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    GroupElement g(dim, step);
    if (row.size() != 1 + g.coefficients().size()) {
      throw Error(ErrorCode::io_error, "row width does not match header");
    }
    std::copy(row.begin() + 1, row.end(), g.coefficients().begin());
    times.push_back(row[0]);
    points.push_back(std::move(g));
  }
  return RoughPathGrid(std::move(times), std::move(points), p);
}

RoughPathGrid read_csv_file(const std::string& filename, double p) {
  std::ifstream in(filename);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + filename);
  return read_csv(in, p);
}

CameronMartinPath::CameronMartinPath(SampledPath knots) : knots_(std::move(knots)) {
  check_times(knots_.times);
  if (knots_.values.size() != knots_.times.size() * static_cast<std::size_t>(knots_.dim)) {
    throw Error(ErrorCode::dimension_mismatch, "knot values do not match dim * times");
  }
}

double CameronMartinPath::energy() const {
  double e = 0.0;
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    const double dt = knots_.times[i] - knots_.times[i - 1];
    double sq = 0.0;
    for (int k = 0; k < knots_.dim; ++k) {
      const double dh = knots_.at(i)[k] - knots_.at(i - 1)[k];
      sq += dh * dh;
    }
    e += sq / dt;
  }
  return 0.5 * e;
}

SampledPath CameronMartinPath::sample(std::span<const double> times) const {
  SampledPath out;
  out.dim = knots_.dim;
  out.times.assign(times.begin(), times.end());
  out.values.resize(times.size() * knots_.dim);
  const auto& kt = knots_.times;
  std::size_t seg = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double s = times[i];
    if (s < kt.front() - kGridTolerance || s > kt.back() + kGridTolerance) {
      throw Error(ErrorCode::invalid_argument, "sample time outside the knot range");
    }
    while (seg + 2 < kt.size() && kt[seg + 1] <= s) ++seg;
    const double lambda = std::clamp((s - kt[seg]) / (kt[seg + 1] - kt[seg]), 0.0, 1.0);
    for (int k = 0; k < knots_.dim; ++k) {
      const double a = knots_.at(seg)[k];
      const double b = knots_.at(seg + 1)[k];
      out.at(i)[k] = lambda == 1.0 ? b : a + lambda * (b - a);
    }
  }
  return out;
}

}  // namespace roughpde
