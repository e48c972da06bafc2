#include "roughpde/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "parallel.hpp"
#include "roughpde/error.hpp"

namespace roughpde {

namespace {

double param(const std::map<std::string, double>& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

}  // namespace

InitialDatum make_initial_datum(const std::string& name, int dim,
                                const std::map<std::string, double>& params) {
  if (dim < 1) throw Error(ErrorCode::invalid_argument, "datum dimension must be >= 1");
  InitialDatum phi;
  phi.name = name;
  phi.dim = dim;
  if (name == "gaussian") {
    const double w2 = std::pow(param(params, "width", 1.0), 2);
    phi.kind = DatumClass::ck;
    phi.lower = 0.0;
    phi.upper = 1.0;
    phi.value = [w2](std::span<const double> y) {
      double r2 = 0.0;
      for (double c : y) r2 += c * c;
      return std::exp(-r2 / (2.0 * w2));
    };
    phi.gradient = [w2](std::span<const double> y, std::span<double> g) {
      double r2 = 0.0;
      for (double c : y) r2 += c * c;
      const double v = std::exp(-r2 / (2.0 * w2));
      for (std::size_t k = 0; k < y.size(); ++k) g[k] = -y[k] / w2 * v;
    };
  } else if (name == "tanh") {
    // tanh(scale * sum_k y_k)
    const double s = param(params, "scale", 1.0);
    phi.kind = DatumClass::ck;
    phi.lower = -1.0;
    phi.upper = 1.0;
    phi.value = [s](std::span<const double> y) {
      double z = 0.0;
      for (double c : y) z += c;
      return std::tanh(s * z);
    };
    phi.gradient = [s](std::span<const double> y, std::span<double> g) {
      double z = 0.0;
      for (double c : y) z += c;
      const double th = std::tanh(s * z);
      for (std::size_t k = 0; k < y.size(); ++k) g[k] = s * (1.0 - th * th);
    };
  } else if (name == "constant") {
    const double c = param(params, "c", 1.0);
    phi.kind = DatumClass::ck;
    phi.lower = c;
    phi.upper = c;
    phi.value = [c](std::span<const double>) { return c; };
    phi.gradient = [](std::span<const double>, std::span<double> g) {
      std::fill(g.begin(), g.end(), 0.0);
    };
  } else if (name == "sine") {
    // prod_k sin(freq * y_k)
    const double f = param(params, "freq", 1.0);
    phi.kind = DatumClass::ck;
    phi.lower = -1.0;
    phi.upper = 1.0;
    phi.value = [f](std::span<const double> y) {
      double v = 1.0;
      for (double c : y) v *= std::sin(f * c);
      return v;
    };
    phi.gradient = [f](std::span<const double> y, std::span<double> g) {
      for (std::size_t k = 0; k < y.size(); ++k) {
        double v = f * std::cos(f * y[k]);
        for (std::size_t m = 0; m < y.size(); ++m) {
          if (m != k) v *= std::sin(f * y[m]);
        }
        g[k] = v;
      }
    };
  } else if (name == "quadratic") {
    phi.kind = DatumClass::unbounded;
    phi.lower = 0.0;
    phi.value = [](std::span<const double> y) {
      double r2 = 0.0;
      for (double c : y) r2 += c * c;
      return r2;
    };
    phi.gradient = [](std::span<const double> y, std::span<double> g) {
      for (std::size_t k = 0; k < y.size(); ++k) g[k] = 2.0 * y[k];
    };
  } else {
    throw Error(ErrorCode::config_error, "unknown initial datum preset '" + name + "'");
  }

  std::vector<std::vector<double>> probes;
  for (int k = 0; k < 5; ++k) {
    std::vector<double> y(dim);
    for (int c = 0; c < dim; ++c) y[c] = -1.2 + 0.6 * ((k + c) % 5);
    probes.push_back(std::move(y));
  }
  const double err = gradient_check_error(phi, probes);
  if (err > 1e-5) {
    throw Error(ErrorCode::config_error, "datum '" + name + "' gradient fails the finite-difference check");
  }
  return phi;
}

double gradient_check_error(const InitialDatum& phi, const std::vector<std::vector<double>>& probes,
                            double h) {
  double worst = 0.0;
  std::vector<double> g(phi.dim);
  for (const auto& y : probes) {
    phi.gradient(y, g);
    for (int k = 0; k < phi.dim; ++k) {
      std::vector<double> yp = y;
      std::vector<double> ym = y;
      yp[k] += h;
      ym[k] -= h;
      const double fd = (phi.value(yp) - phi.value(ym)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - g[k]));
    }
  }
  return worst;
}

SpaceGrid SpaceGrid::uniform(int dim, double lo, double hi, double spacing) {
  if (!(hi > lo) || !(spacing > 0.0)) throw Error(ErrorCode::invalid_argument, "empty space box");
  SpaceGrid g;
  const int n = static_cast<int>(std::lround((hi - lo) / spacing)) + 1;
  if (n < 3) throw Error(ErrorCode::invalid_argument, "space grid needs at least three nodes per axis");
  g.lo.assign(dim, lo);
  g.hi.assign(dim, hi);
  g.nodes.assign(dim, n);
  return g;
}

std::size_t SpaceGrid::size() const {
  std::size_t n = 1;
  for (int k : nodes) n *= static_cast<std::size_t>(k);
  return n;
}

double SpaceGrid::coordinate(int axis, int j) const {
  if (j == nodes[axis] - 1) return hi[axis];
  return lo[axis] + j * spacing(axis);
}

void SpaceGrid::point(std::size_t flat, std::span<double> out) const {
  for (int axis = dim() - 1; axis >= 0; --axis) {
    const int j = static_cast<int>(flat % nodes[axis]);
    flat /= nodes[axis];
    out[axis] = coordinate(axis, j);
  }
}

std::vector<double> SpaceGrid::points() const {
  std::vector<double> out(size() * dim());
  for (std::size_t i = 0; i < size(); ++i) point(i, std::span<double>(out).subspan(i * dim(), dim()));
  return out;
}

void write_scalar_field_csv(std::ostream& out, const ScalarField& field) {
  const int e = field.space.dim();
  out << "t";
  for (int a = 0; a < e; ++a) out << ",y_" << a + 1;
  out << ",u\n";
  const auto pts = field.space.points();
  char buf[32];
  for (std::size_t i = 0; i < field.times.size(); ++i) {
    const auto u = field.at_time(i);
    for (std::size_t j = 0; j < field.space.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", field.times[i]);
      out << buf;
      for (int a = 0; a < e; ++a) {
        std::snprintf(buf, sizeof buf, "%.17g", pts[j * e + a]);
        out << ',' << buf;
      }
      std::snprintf(buf, sizeof buf, "%.17g", u[j]);
      out << ',' << buf << '\n';
    }
  }
}

void write_scalar_field_csv(const std::string& filename, const ScalarField& field) {
  std::ofstream out(filename);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + filename);
  write_scalar_field_csv(out, field);
}

double sup_distance(const ScalarField& a, const ScalarField& b) {
  if (a.values.size() != b.values.size() || a.times != b.times) {
    throw Error(ErrorCode::dimension_mismatch, "fields live on different grids");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
  }
  return worst;
}

ScalarField solve_transport(const VectorFieldSet& v, const InitialDatum& phi,
                            const RoughPathGrid& x, std::span<const double> output_times,
                            const SpaceGrid& grid, const RdeOptions& options, Execution exec) {
  if (grid.dim() != v.state_dim() || phi.dim != v.state_dim()) {
    throw Error(ErrorCode::dimension_mismatch, "grid, datum and fields disagree on dimension");
  }
  ScalarField out;
  out.space = grid;
  out.times.assign(output_times.begin(), output_times.end());
  out.values.resize(out.times.size() * grid.size());
  const int e = grid.dim();
  const auto pts = grid.points();
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
  for (std::size_t ti = 0; ti < out.times.size(); ++ti) {
    auto u = out.at_time(ti);
    const double t = out.times[ti];
    const std::size_t k = x.index_of(t);
    if (k == 0) {
      for (std::ptrdiff_t j = 0; j < n; ++j) u[j] = phi.value(std::span(pts).subspan(j * e, e));
      continue;
    }
    const DriverIncrements steps = reversed_increments_of(x, t, options.substeps, options.scheme_step);
    detail::for_each_index(exec, n, [&](std::ptrdiff_t j) {
      const auto zeta = solve_rde_endpoint(v, std::span(pts).subspan(j * e, e), steps, options);
      u[j] = phi.value(zeta);
    });
  }
  return out;
}

double solution_map_modulus(const VectorFieldSet& v, const InitialDatum& phi,
                            const RoughPathGrid& x, const RoughPathGrid& x_perturbed,
                            std::span<const double> output_times, const SpaceGrid& grid,
                            const RdeOptions& options) {
  const ScalarField a = solve_transport(v, phi, x, output_times, grid, options);
  const ScalarField b = solve_transport(v, phi, x_perturbed, output_times, grid, options);
  return sup_distance(a, b);
}

}  // namespace roughpde
