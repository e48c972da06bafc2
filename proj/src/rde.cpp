#include "roughpde/rde.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include "parallel.hpp"
#include "roughpde/error.hpp"

namespace roughpde {

namespace {

constexpr int kMaxJetDim = 4;

// Second-order forward-mode number: value, gradient and Hessian in n variables.
struct Jet2 {
  int n = 0;
  double v = 0.0;
  std::array<double, kMaxJetDim> g{};
  std::array<double, kMaxJetDim * kMaxJetDim> h{};

  explicit Jet2(int dims = 0) : n(dims) {}

  Jet2& operator+=(const Jet2& o) {
    v += o.v;
    for (int b = 0; b < n; ++b) g[b] += o.g[b];
    for (int b = 0; b < n * n; ++b) h[b] += o.h[b];
    return *this;
  }
};

Jet2 operator*(const Jet2& a, const Jet2& b) {
  Jet2 out(a.n);
  out.v = a.v * b.v;
  for (int i = 0; i < a.n; ++i) out.g[i] = a.v * b.g[i] + b.v * a.g[i];
  for (int i = 0; i < a.n; ++i) {
    for (int j = 0; j < a.n; ++j) {
      out.h[i * a.n + j] =
          a.v * b.h[i * a.n + j] + b.v * a.h[i * a.n + j] + a.g[i] * b.g[j] + b.g[i] * a.g[j];
    }
  }
  return out;
}

Jet2 operator*(double s, const Jet2& a) {
  Jet2 out(a.n);
  out.v = s * a.v;
  for (int i = 0; i < a.n; ++i) out.g[i] = s * a.g[i];
  for (int i = 0; i < a.n * a.n; ++i) out.h[i] = s * a.h[i];
  return out;
}

inline double zero_like(double, int) { return 0.0; }
inline Jet2 zero_like(const Jet2&, int n) { return Jet2(n); }

// Derivative tables of V as plain numbers, orders 0..N-1.
struct PlainTable {
  const FieldDerivatives& f;
  double val(int i, int a) const { return f.value(i, a); }
  double d1(int i, int a, int b) const { return f.d1(i, a, b); }
  double d2(int i, int a, int b, int c) const { return f.d2(i, a, b, c); }
};

// Derivative tables of V promoted to Jet2 numbers in the base point: the jet of
// an order-m entry is built from orders m, m+1 and m+2.
using JetOrders = std::array<std::vector<Jet2>, kMaxStep>;

class JetTable {
 public:
  JetTable(const FieldDerivatives& f, int scheme_step, JetOrders& storage)
      : e_(f.state_dim), orders_(storage) {
    for (int m = 0; m < scheme_step; ++m) {
      const std::size_t count = f.data[m].size();
      auto& out = orders_[m];
      out.assign(count, Jet2(e_));
      for (std::size_t idx = 0; idx < count; ++idx) {
        Jet2& j = out[idx];
        j.v = f.data[m][idx];
        for (int b = 0; b < e_; ++b) j.g[b] = f.data[m + 1][idx * e_ + b];
        for (int b = 0; b < e_ * e_; ++b) j.h[b] = f.data[m + 2][idx * e_ * e_ + b];
      }
    }
  }

  const Jet2& val(int i, int a) const { return orders_[0][i * e_ + a]; }
  const Jet2& d1(int i, int a, int b) const { return orders_[1][(i * e_ + a) * e_ + b]; }
  const Jet2& d2(int i, int a, int b, int c) const {
    return orders_[2][((i * e_ + a) * e_ + b) * e_ + c];
  }

 private:
  int e_;
  JetOrders& orders_;
};

// out[a] = sum_{1 <= |w| <= N} (V_{w_1} ... V_{w_n} I)^a s^w.
template <class Table, class T>
void scheme_increment(const Table& tb, const GroupElement& s, int d, int e, std::vector<T>& out,
                      const T& zero) {
  const int n = s.step();
  out.assign(e, zero);
  for (int a = 0; a < e; ++a) {
    for (int i = 0; i < d; ++i) {
      if (s(i) != 0.0) out[a] += s(i) * tb.val(i, a);
    }
  }
  if (n < 2) return;
  thread_local std::vector<T> p, vv, g, r, q;
  // Level 2: word (i, j) -> DV_j V_i; contract P_j^b = sum_i s^{ij} V_i^b first.
  p.assign(static_cast<std::size_t>(d) * e, zero);
  for (int j = 0; j < d; ++j) {
    for (int b = 0; b < e; ++b) {
      T& acc = p[j * e + b];
      for (int i = 0; i < d; ++i) {
        if (s(i, j) != 0.0) acc += s(i, j) * tb.val(i, b);
      }
    }
  }
  for (int a = 0; a < e; ++a) {
    for (int j = 0; j < d; ++j) {
      for (int b = 0; b < e; ++b) out[a] += tb.d1(j, a, b) * p[j * e + b];
    }
  }
  if (n < 3) return;
  // Level 3: word (i, j, k) -> D^2 V_k [V_j, V_i] + DV_k (DV_j V_i).
  vv.assign(static_cast<std::size_t>(d) * d * e * e, zero);  // V_i^c V_j^b
  g.assign(static_cast<std::size_t>(d) * d * e, zero);       // (DV_j V_i)^b
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int b = 0; b < e; ++b) {
        for (int c = 0; c < e; ++c) {
          vv[((i * d + j) * e + b) * e + c] = tb.val(j, b) * tb.val(i, c);
          g[(i * d + j) * e + b] += tb.d1(j, b, c) * tb.val(i, c);
        }
      }
    }
  }
  for (int k = 0; k < d; ++k) {
    r.assign(static_cast<std::size_t>(e) * e, zero);
    q.assign(e, zero);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double w = s(i, j, k);
        if (w == 0.0) continue;
        for (int bc = 0; bc < e * e; ++bc) r[bc] += w * vv[(i * d + j) * e * e + bc];
        for (int b = 0; b < e; ++b) q[b] += w * g[(i * d + j) * e + b];
      }
    }
    for (int a = 0; a < e; ++a) {
      for (int b = 0; b < e; ++b) {
        out[a] += tb.d1(k, a, b) * q[b];
        for (int c = 0; c < e; ++c) out[a] += tb.d2(k, a, b, c) * r[b * e + c];
      }
    }
  }
}

void check_driver(const VectorFieldSet& v, const DriverIncrements& steps, std::size_t y_dim,
                  int extra_orders) {
  if (v.fields() != steps.dim) {
    throw Error(ErrorCode::dimension_mismatch, "vector field count " + std::to_string(v.fields()) +
                                                   " differs from driver dimension " +
                                                   std::to_string(steps.dim));
  }
  if (static_cast<int>(y_dim) != v.state_dim()) {
    throw Error(ErrorCode::dimension_mismatch, "initial point has wrong dimension");
  }
  if (v.smoothness() < steps.step - 1 + extra_orders) {
    throw Error(ErrorCode::invalid_argument,
                "vector fields not smooth enough for a step-" + std::to_string(steps.step) +
                    " scheme");
  }
}

void check_finite(std::span<const double> y, double bound, double t) {
  for (double c : y) {
    if (!std::isfinite(c) || std::abs(c) > bound) {
      throw BlowUpError(t, "RDE solution left the admissible region at t = " + std::to_string(t));
    }
  }
}

struct StateScratch {
  FieldDerivatives f;
  std::vector<double> inc;
};

void advance_state_impl(const VectorFieldSet& v, const GroupElement& s, int substeps,
                        std::vector<double>& y, StateScratch& scratch) {
  const int e = v.state_dim();
  for (int sub = 0; sub < substeps; ++sub) {
    v.evaluate(y, s.step() - 1, scratch.f);
    scheme_increment(PlainTable{scratch.f}, s, v.fields(), e, scratch.inc, 0.0);
    for (int a = 0; a < e; ++a) y[a] += scratch.inc[a];
  }
}

struct JetScratch {
  FieldDerivatives f;
  std::vector<Jet2> inc;
  std::vector<double> jac;
  std::vector<double> hess;
  JetOrders orders;
};

void advance_jet_impl(const VectorFieldSet& v, const GroupElement& s, int substeps, FlowJet& jet,
                      JetScratch& scratch) {
  const int e = v.state_dim();
  if (e > kMaxJetDim) throw Error(ErrorCode::invalid_argument, "jets support state dimension <= 4");
  scratch.jac.resize(e * e);
  scratch.hess.resize(e * e * e);
  auto& inc = scratch.inc;
  for (int sub = 0; sub < substeps; ++sub) {
    v.evaluate(jet.point, s.step() + 1, scratch.f);
    JetTable table(scratch.f, s.step(), scratch.orders);
    scheme_increment(table, s, v.fields(), e, inc, Jet2(e));
    for (int a = 0; a < e; ++a) {
      for (int kk = 0; kk < e; ++kk) {
        double acc = jet.jac(a, kk);
        for (int b = 0; b < e; ++b) acc += inc[a].g[b] * jet.jac(b, kk);
        scratch.jac[a * e + kk] = acc;
        for (int l = 0; l < e; ++l) {
          double h = jet.hess(a, kk, l);
          for (int b = 0; b < e; ++b) {
            h += inc[a].g[b] * jet.hess(b, kk, l);
            for (int c = 0; c < e; ++c) h += inc[a].h[b * e + c] * jet.jac(b, kk) * jet.jac(c, l);
          }
          scratch.hess[(a * e + kk) * e + l] = h;
        }
      }
    }
    for (int a = 0; a < e; ++a) jet.point[a] += inc[a].v;
    jet.jacobian = scratch.jac;
    jet.hessian = scratch.hess;
  }
}

template <class Visit>
void integrate(const VectorFieldSet& v, std::span<const double> y0, const DriverIncrements& steps,
               const RdeOptions& options, Visit&& visit) {
  check_driver(v, steps, y0.size(), 0);
  std::vector<double> y(y0.begin(), y0.end());
  StateScratch scratch;
  visit(0, y);
  for (std::size_t k = 0; k < steps.steps.size(); ++k) {
    advance_state_impl(v, steps.steps[k], steps.substeps, y, scratch);
    check_finite(y, options.blow_up_threshold, steps.times[k + 1]);
    visit(k + 1, y);
  }
}

}  // namespace

namespace {

int resolve_step(const RoughPathGrid& x, int scheme_step) {
  if (scheme_step == 0) return x.step();
  if (scheme_step < x.step() || scheme_step > 3) {
    throw Error(ErrorCode::step_mismatch, "scheme step must lie between the driver step and 3");
  }
  return scheme_step;
}

// One of `substeps` equal geodesic pieces of g, in the requested step.
GroupElement piece_of(const GroupElement& g, int substeps, int step) {
  if (substeps == 1 && step == g.step()) return g;
  const LieElement l = log(g);
  LieElement piece(g.dim(), step);
  for (int k = 1; k <= g.step(); ++k) {
    const auto src = l.level(k);
    auto dst = piece.level(k);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] / substeps;
  }
  return exp(piece, std::numeric_limits<double>::infinity());
}

}  // namespace

DriverIncrements increments_of(const RoughPathGrid& x, int substeps, int scheme_step) {
  if (substeps < 1) throw Error(ErrorCode::invalid_argument, "substeps must be >= 1");
  DriverIncrements out;
  out.dim = x.dim();
  out.step = resolve_step(x, scheme_step);
  out.times = x.times();
  out.substeps = substeps;
  out.steps.reserve(x.segments());
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    out.steps.push_back(piece_of(x.increment(k, k + 1), substeps, out.step));
  }
  return out;
}

DriverIncrements reversed_increments_of(const RoughPathGrid& x, double t, int substeps,
                                        int scheme_step) {
  if (substeps < 1) throw Error(ErrorCode::invalid_argument, "substeps must be >= 1");
  const std::size_t j = x.index_of(t);
  if (j == 0) throw Error(ErrorCode::not_on_grid, "reversal time must be positive");
  DriverIncrements out;
  out.dim = x.dim();
  out.step = resolve_step(x, scheme_step);
  out.substeps = substeps;
  const double tj = x.times()[j];
  out.times.resize(j + 1);
  out.times[0] = 0.0;
  for (std::size_t k = 1; k <= j; ++k) out.times[k] = tj - x.times()[j - k];
  out.steps.reserve(j);
  for (std::size_t k = 0; k < j; ++k) {
    // Reversed increment on [s_k, s_{k+1}] is the inverse of x_{t_{j-k-1}, t_{j-k}}.
    out.steps.push_back(
        piece_of(multiply(inverse(x.point(j - k)), x.point(j - k - 1)), substeps, out.step));
  }
  return out;
}

FlowJet FlowJet::initial(std::span<const double> y) {
  FlowJet jet;
  jet.dim = static_cast<int>(y.size());
  jet.point.assign(y.begin(), y.end());
  jet.jacobian.assign(jet.dim * jet.dim, 0.0);
  for (int a = 0; a < jet.dim; ++a) jet.jacobian[a * jet.dim + a] = 1.0;
  jet.hessian.assign(jet.dim * jet.dim * jet.dim, 0.0);
  return jet;
}

double FlowJet::condition_number() const {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> j(
      jacobian.data(), dim, dim);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smallest;
}

Trajectory solve_rde(const VectorFieldSet& v, std::span<const double> y0, const RoughPathGrid& x,
                     const RdeOptions& options) {
  return solve_rde(v, y0, increments_of(x, options.substeps, options.scheme_step), options);
}

Trajectory solve_rde(const VectorFieldSet& v, std::span<const double> y0,
                     const DriverIncrements& steps, const RdeOptions& options) {
  Trajectory out;
  out.dim = static_cast<int>(y0.size());
  out.times = steps.times;
  out.states.resize(out.times.size() * out.dim);
  integrate(v, y0, steps, options, [&](std::size_t k, const std::vector<double>& y) {
    std::copy(y.begin(), y.end(), out.states.begin() + k * out.dim);
  });
  return out;
}

std::vector<double> solve_rde_endpoint(const VectorFieldSet& v, std::span<const double> y0,
                                       const DriverIncrements& steps, const RdeOptions& options) {
  std::vector<double> last;
  integrate(v, y0, steps, options, [&](std::size_t k, const std::vector<double>& y) {
    if (k + 1 == steps.times.size()) last = y;
  });
  return last;
}

std::vector<FlowJet> solve_rde_jet(const VectorFieldSet& v, std::span<const double> y0,
                                   const RoughPathGrid& x, const RdeOptions& options) {
  return solve_rde_jet(v, y0, increments_of(x, options.substeps, options.scheme_step), options);
}

// The jet of the discrete step map equals the step-N scheme applied to the
// augmented system (y, Dy, D^2y) driven by the prolonged fields
// (V, DV J, D^2V[J, J] + DV H): prolongation commutes with composing fields as
// derivations, so both routes produce the same numbers.
std::vector<FlowJet> solve_rde_jet(const VectorFieldSet& v, std::span<const double> y0,
                                   const DriverIncrements& steps, const RdeOptions& options) {
  check_driver(v, steps, y0.size(), 2);
  std::vector<FlowJet> out;
  out.reserve(steps.times.size());
  FlowJet jet = FlowJet::initial(y0);
  out.push_back(jet);
  JetScratch scratch;
  for (std::size_t k = 0; k < steps.steps.size(); ++k) {
    advance_jet_impl(v, steps.steps[k], steps.substeps, jet, scratch);
    check_finite(jet.point, options.blow_up_threshold, steps.times[k + 1]);
    out.push_back(jet);
  }
  return out;
}

void advance_state(const VectorFieldSet& v, const GroupElement& s, int substeps,
                   std::vector<double>& y) {
  StateScratch scratch;
  advance_state_impl(v, s, substeps, y, scratch);
}

void advance_jet(const VectorFieldSet& v, const GroupElement& s, int substeps, FlowJet& jet) {
  JetScratch scratch;
  advance_jet_impl(v, s, substeps, jet, scratch);
}

std::vector<double> inverse_flow(const VectorFieldSet& v, std::span<const double> y,
                                 const RoughPathGrid& x, double t, const RdeOptions& options) {
  return solve_rde_endpoint(v, y, reversed_increments_of(x, t, options.substeps, options.scheme_step), options);
}

std::vector<double> inverse_flow_batch(const VectorFieldSet& v, std::span<const double> points,
                                       const RoughPathGrid& x, double t, const RdeOptions& options,
                                       Execution exec) {
  const int e = v.state_dim();
  const DriverIncrements steps = reversed_increments_of(x, t, options.substeps, options.scheme_step);
  std::vector<double> out(points.size());
  const auto n = static_cast<std::ptrdiff_t>(points.size() / e);
  detail::for_each_index(exec, n, [&](std::ptrdiff_t i) {
    auto end = solve_rde_endpoint(v, points.subspan(i * e, e), steps, options);
    std::copy(end.begin(), end.end(), out.begin() + i * e);
  });
  return out;
}

void write_trajectory_csv(const std::string& filename, const Trajectory& trajectory) {
  std::ofstream out(filename);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + filename);
  out << "t";
  for (int a = 0; a < trajectory.dim; ++a) out << ",y_" << a + 1;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < trajectory.times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", trajectory.times[i]);
    out << buf;
    for (double c : trajectory.at(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", c);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace roughpde
