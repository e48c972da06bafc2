#include "roughpde/parabolic.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "parallel.hpp"
#include "roughpde/drivers.hpp"
#include "roughpde/error.hpp"

namespace roughpde {

namespace {

double param(const std::map<std::string, double>& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::size_t grid_index(std::span<const double> times, double t) {
  const double tol = 1e-12 * std::max(1.0, std::abs(times.back()));
  const auto it = std::lower_bound(times.begin(), times.end(), t - tol);
  if (it == times.end() || std::abs(*it - t) > tol) {
    throw Error(ErrorCode::not_on_grid, "output time is not a grid time");
  }
  return static_cast<std::size_t>(it - times.begin());
}

// Inverse of a small square matrix (row-major).
void invert(std::span<const double> m, int e, std::span<double> out) {
  if (e == 1) {
    out[0] = 1.0 / m[0];
    return;
  }
  if (e == 2) {
    const double det = m[0] * m[3] - m[1] * m[2];
    out[0] = m[3] / det;
    out[1] = -m[1] / det;
    out[2] = -m[2] / det;
    out[3] = m[0] / det;
    return;
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(
      m.data(), e, e);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> inv(
      out.data(), e, e);
  inv = a.inverse();
}

}  // namespace

EllipticCoefficients make_coefficients(const std::string& name, int dim,
                                       const std::map<std::string, double>& params) {
  if (dim < 1 || dim > 2) throw Error(ErrorCode::invalid_argument, "coefficients need e in {1, 2}");
  const double sigma = param(params, "sigma", 1.0);
  const double mu = param(params, "mu", 0.0);
  if (!(sigma > 0.0)) throw Error(ErrorCode::invalid_argument, "sigma must be positive");
  EllipticCoefficients c;
  c.name = name;
  c.dim = dim;
  const double s2 = sigma * sigma;
  if (name == "heat") {
    c.diffusion = [s2, dim](double, std::span<const double>, std::span<double> a) {
      std::fill(a.begin(), a.end(), 0.0);
      for (int i = 0; i < dim; ++i) a[i * dim + i] = s2;
    };
    c.drift = [mu](double, std::span<const double>, std::span<double> b) {
      std::fill(b.begin(), b.end(), mu);
    };
    c.ellipticity = s2;
    c.holder_exponent = 1.0;
    c.holder_constant = 0.0;
  } else if (name == "variable") {
    if (dim == 1) {
      c.diffusion = [s2](double t, std::span<const double> y, std::span<double> a) {
        a[0] = s2 * (1.5 + 0.5 * std::sin(y[0] + t));
      };
      c.drift = [mu](double, std::span<const double> y, std::span<double> b) {
        b[0] = mu * std::cos(y[0]);
      };
      c.ellipticity = s2;
    } else {
      c.diffusion = [s2](double t, std::span<const double> y, std::span<double> a) {
        a[0] = s2 * (1.5 + 0.5 * std::sin(y[0] + t));
        a[1] = s2 * 0.3;
        a[2] = s2 * 0.3;
        a[3] = s2 * (1.5 + 0.5 * std::cos(y[1]));
      };
      c.drift = [mu](double, std::span<const double> y, std::span<double> b) {
        b[0] = mu * std::cos(y[0]);
        b[1] = mu * std::sin(y[1]);
      };
      c.ellipticity = 0.7 * s2;
    }
    c.holder_exponent = 1.0;
    c.holder_constant = 0.5 * s2 * std::sqrt(2.0) + std::abs(mu);
  } else {
    throw Error(ErrorCode::config_error, "unknown coefficient preset: " + name);
  }
  return c;
}

double min_eigenvalue(std::span<const double> a, int e) {
  if (e == 1) return a[0];
  if (e == 2) {
    const double m = 0.5 * (a[0] + a[3]);
    const double off = 0.5 * (a[1] + a[2]);
    const double r = std::hypot(0.5 * (a[0] - a[3]), off);
    return m - r;
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      a.data(), e, e);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().minCoeff();
}

CoefficientReport validate_coefficients(const EllipticCoefficients& c, double horizon, double lo,
                                        double hi, int probes, std::uint64_t seed) {
  const int e = c.dim;
  std::mt19937_64 rng = make_engine(seed);
  std::uniform_real_distribution<double> ut(0.0, horizon);
  std::uniform_real_distribution<double> uy(lo, hi);
  CoefficientReport report;
  report.min_eigenvalue = std::numeric_limits<double>::infinity();
  std::vector<double> y(e), z(e), a(e * e), a2(e * e), b(e), b2(e);
  for (int p = 0; p < probes; ++p) {
    const double t = ut(rng);
    const double s = ut(rng);
    for (int i = 0; i < e; ++i) y[i] = uy(rng);
    for (int i = 0; i < e; ++i) z[i] = uy(rng);
    c.diffusion(t, y, a);
    c.drift(t, y, b);
    c.diffusion(s, z, a2);
    c.drift(s, z, b2);
    for (int i = 0; i < e; ++i) {
      for (int j = 0; j < e; ++j) {
        report.symmetry_defect = std::max(report.symmetry_defect, std::abs(a[i * e + j] - a[j * e + i]));
      }
    }
    report.min_eigenvalue = std::min(report.min_eigenvalue, min_eigenvalue(a, e));
    double dy = 0.0;
    for (int i = 0; i < e; ++i) dy = std::max(dy, std::abs(y[i] - z[i]));
    const double scale =
        std::pow(dy, c.holder_exponent) + std::pow(std::abs(t - s), 0.5 * c.holder_exponent);
    double gap = 0.0;
    for (int i = 0; i < e * e; ++i) gap = std::max(gap, std::abs(a[i] - a2[i]));
    for (int i = 0; i < e; ++i) gap = std::max(gap, std::abs(b[i] - b2[i]));
    if (scale > 0.0) report.holder_ratio_max = std::max(report.holder_ratio_max, gap / scale);
  }
  report.ok = report.symmetry_defect <= 1e-12 && report.min_eigenvalue >= c.ellipticity - 1e-12 &&
              report.holder_ratio_max <= c.holder_constant + 1e-9;
  return report;
}

PlainCoefficientSource::PlainCoefficientSource(const EllipticCoefficients& c,
                                               const SpaceGrid& space, std::vector<double> times,
                                               Execution exec)
    : c_(c), points_(space.points()), times_(std::move(times)), exec_(exec) {
  if (space.dim() != c.dim) throw Error(ErrorCode::dimension_mismatch, "grid and coefficients disagree");
}

void PlainCoefficientSource::evaluate(std::size_t segment, double fraction, std::vector<double>& a,
                                      std::vector<double>& b) {
  const int e = c_.dim;
  const std::size_t n = points_.size() / e;
  double t = times_[segment] + fraction * (times_[segment + 1] - times_[segment]);
  if (fraction == 0.0) t = times_[segment];
  if (fraction == 1.0) t = times_[segment + 1];
  a.resize(n * e * e);
  b.resize(n * e);
  detail::for_each_index(exec_, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t j) {
    const auto y = std::span<const double>(points_).subspan(j * e, e);
    c_.diffusion(t, y, std::span<double>(a).subspan(j * e * e, e * e));
    c_.drift(t, y, std::span<double>(b).subspan(j * e, e));
  });
}

TransformedCoefficientSource::TransformedCoefficientSource(const EllipticCoefficients& c,
                                                           const VectorFieldSet& v,
                                                           const RoughPathGrid& x,
                                                           const SpaceGrid& space,
                                                           const RdeOptions& options,
                                                           Execution exec)
    : c_(c), v_(v), steps_(increments_of(x, options.substeps, options.scheme_step)), space_(space), options_(options),
      exec_(exec) {
  if (space.dim() != c.dim || v.state_dim() != c.dim) {
    throw Error(ErrorCode::dimension_mismatch, "grid, coefficients and fields disagree");
  }
  if (v.fields() != x.dim()) throw Error(ErrorCode::dimension_mismatch, "driver and fields disagree");
  if (v.smoothness() < steps_.step + 1) {
    throw Error(ErrorCode::invalid_argument, "vector fields are not smooth enough for jets");
  }
  const auto pts = space.points();
  const int e = space.dim();
  jets_.reserve(space.size());
  for (std::size_t j = 0; j < space.size(); ++j) {
    jets_.push_back(FlowJet::initial(std::span<const double>(pts).subspan(j * e, e)));
  }
  ellipticity_.assign(steps_.times.size(), std::numeric_limits<double>::quiet_NaN());
  condition_.assign(steps_.times.size(), std::numeric_limits<double>::quiet_NaN());
}

void TransformedCoefficientSource::advance_to(std::size_t k) {
  if (k < index_) throw Error(ErrorCode::invalid_argument, "coefficient stream cannot rewind");
  while (index_ < k) {
    const GroupElement& s = steps_.steps[index_];
    const double t_next = steps_.times[index_ + 1];
    detail::for_each_index(exec_, static_cast<std::ptrdiff_t>(jets_.size()), [&](std::ptrdiff_t j) {
      advance_jet(v_, s, steps_.substeps, jets_[j]);
      for (double y : jets_[j].point) {
        if (!std::isfinite(y) || std::abs(y) > options_.blow_up_threshold) {
          throw BlowUpError(t_next, "flow left the admissible range");
        }
      }
    });
    ++index_;
  }
}

// a_x = Dzeta a(xi) Dzeta^T, b_x = 1/2 a(xi) : D^2 zeta + Dzeta b(xi), with
// Dzeta = (Dxi)^{-1} and D^2 zeta[u, w] = -Dzeta D^2 xi[Dzeta u, Dzeta w].
void TransformedCoefficientSource::assemble() {
  const int e = space_.dim();
  const std::size_t n = jets_.size();
  const double t = steps_.times[index_];
  a_cur_.resize(n * e * e);
  b_cur_.resize(n * e);
  std::vector<double> lam(n), cond(n);
  detail::for_each_index(exec_, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t j) {
    const FlowJet& jet = jets_[j];
    cond[j] = jet.condition_number();
    if (!(cond[j] <= 1e8)) {
      throw Error(ErrorCode::singular_jacobian, "flow Jacobian is numerically singular");
    }
    double inv[16], a[16], b[4], h2[64];
    invert(jet.jacobian, e, std::span<double>(inv, e * e));
    c_.diffusion(t, jet.point, std::span<double>(a, e * e));
    c_.drift(t, jet.point, std::span<double>(b, e));
    // h2[i][k][l] = d^2 zeta^i / d y^k d y^l at xi.
    for (int i = 0; i < e; ++i) {
      for (int k = 0; k < e; ++k) {
        for (int l = 0; l < e; ++l) {
          double acc = 0.0;
          for (int m = 0; m < e; ++m) {
            double inner = 0.0;
            for (int p = 0; p < e; ++p) {
              for (int q = 0; q < e; ++q) inner += jet.hess(m, p, q) * inv[p * e + k] * inv[q * e + l];
            }
            acc += inv[i * e + m] * inner;
          }
          h2[(i * e + k) * e + l] = -acc;
        }
      }
    }
    double* ax = a_cur_.data() + j * e * e;
    double* bx = b_cur_.data() + j * e;
    for (int i = 0; i < e; ++i) {
      for (int r = 0; r < e; ++r) {
        double acc = 0.0;
        for (int k = 0; k < e; ++k) {
          for (int l = 0; l < e; ++l) acc += a[k * e + l] * inv[i * e + k] * inv[r * e + l];
        }
        ax[i * e + r] = acc;
      }
      double acc = 0.0;
      for (int k = 0; k < e; ++k) {
        acc += b[k] * inv[i * e + k];
        for (int l = 0; l < e; ++l) acc += 0.5 * a[k * e + l] * h2[(i * e + k) * e + l];
      }
      bx[i] = acc;
    }
    for (int i = 0; i < e; ++i) {
      for (int r = 0; r < i; ++r) {
        const double s = 0.5 * (ax[i * e + r] + ax[r * e + i]);
        ax[i * e + r] = s;
        ax[r * e + i] = s;
      }
    }
    lam[j] = min_eigenvalue(std::span<const double>(ax, e * e), e);
  });
  ellipticity_[index_] = *std::min_element(lam.begin(), lam.end());
  condition_[index_] = *std::max_element(cond.begin(), cond.end());
}

void TransformedCoefficientSource::at_index(std::size_t k, std::vector<double>& a,
                                            std::vector<double>& b) {
  if (k == left_index_) {
    a = a_left_;
    b = b_left_;
    return;
  }
  if (k == right_index_) {
    a = a_right_;
    b = b_right_;
    return;
  }
  advance_to(k);
  assemble();
  a = a_cur_;
  b = b_cur_;
}

void TransformedCoefficientSource::evaluate(std::size_t segment, double fraction,
                                            std::vector<double>& a, std::vector<double>& b) {
  if (segment + 1 >= steps_.times.size()) throw Error(ErrorCode::invalid_argument, "segment out of range");
  if (left_index_ != segment) {
    if (right_index_ == segment) {
      std::swap(a_left_, a_right_);
      std::swap(b_left_, b_right_);
      left_index_ = segment;
      right_index_ = static_cast<std::size_t>(-1);
    } else {
      advance_to(segment);
      assemble();
      a_left_ = a_cur_;
      b_left_ = b_cur_;
      left_index_ = segment;
    }
  }
  if (right_index_ != segment + 1) {
    advance_to(segment + 1);
    assemble();
    a_right_ = a_cur_;
    b_right_ = b_cur_;
    right_index_ = segment + 1;
  }
  if (fraction == 0.0) {
    a = a_left_;
    b = b_left_;
  } else if (fraction == 1.0) {
    a = a_right_;
    b = b_right_;
  } else {
    a.resize(a_left_.size());
    b.resize(b_left_.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = (1 - fraction) * a_left_[i] + fraction * a_right_[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = (1 - fraction) * b_left_[i] + fraction * b_right_[i];
  }
}

double TransformedCoefficients::ellipticity_lower_bound() const {
  return ellipticity.empty() ? 0.0 : *std::min_element(ellipticity.begin(), ellipticity.end());
}

double TransformedCoefficients::symmetry_defect() const {
  const int e = space.dim();
  double worst = 0.0;
  for (std::size_t m = 0; m < a.size() / (e * e); ++m) {
    for (int i = 0; i < e; ++i) {
      for (int j = 0; j < e; ++j) {
        worst = std::max(worst, std::abs(a[m * e * e + i * e + j] - a[m * e * e + j * e + i]));
      }
    }
  }
  return worst;
}

TransformedCoefficients transform_coefficients(const EllipticCoefficients& c,
                                               const VectorFieldSet& v, const RoughPathGrid& x,
                                               const SpaceGrid& space,
                                               std::span<const double> output_times,
                                               const RdeOptions& options, Execution exec) {
  TransformedCoefficientSource source(c, v, x, space, options, exec);
  TransformedCoefficients out;
  out.space = space;
  out.times.assign(output_times.begin(), output_times.end());
  std::vector<double> a, b;
  for (double t : output_times) {
    const std::size_t k = x.index_of(t);
    source.at_index(k, a, b);
    out.a.insert(out.a.end(), a.begin(), a.end());
    out.b.insert(out.b.end(), b.begin(), b.end());
    out.ellipticity.push_back(source.ellipticity()[k]);
    out.condition.push_back(source.condition()[k]);
  }
  return out;
}

double jacobian_duality_residual(const VectorFieldSet& v, const RoughPathGrid& x, double t,
                                 std::span<const double> probes, const RdeOptions& options) {
  const int e = v.state_dim();
  const std::size_t k = x.index_of(t);
  if (k == 0) return 0.0;
  const DriverIncrements forward = increments_of(x, options.substeps, options.scheme_step);
  DriverIncrements head = forward;
  head.times.resize(k + 1);
  head.steps.erase(head.steps.begin() + static_cast<std::ptrdiff_t>(k), head.steps.end());
  const DriverIncrements backward = reversed_increments_of(x, t, options.substeps, options.scheme_step);
  double worst = 0.0;
  for (std::size_t p = 0; p < probes.size() / e; ++p) {
    const auto fwd = solve_rde_jet(v, probes.subspan(p * e, e), head, options).back();
    const auto bwd = solve_rde_jet(v, fwd.point, backward, options).back();
    for (int i = 0; i < e; ++i) {
      for (int j = 0; j < e; ++j) {
        double acc = 0.0;
        for (int m = 0; m < e; ++m) acc += bwd.jac(i, m) * fwd.jac(m, j);
        worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
      }
    }
  }
  return worst;
}

BoundaryCondition parse_boundary(const std::string& name) {
  if (name == "dirichlet") return BoundaryCondition::dirichlet;
  if (name == "neumann") return BoundaryCondition::neumann;
  throw Error(ErrorCode::config_error, "unknown boundary condition: " + name);
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct Stencil {
  const SpaceGrid& space;
  int e;
  std::vector<int> stride;
  std::vector<double> h;

  explicit Stencil(const SpaceGrid& s) : space(s), e(s.dim()), stride(s.dim()), h(s.dim()) {
    int acc = 1;
    for (int axis = e - 1; axis >= 0; --axis) {
      stride[axis] = acc;
      acc *= s.nodes[axis];
      h[axis] = s.spacing(axis);
    }
  }

  int index(std::size_t flat, int axis) const {
    return static_cast<int>((flat / stride[axis]) % space.nodes[axis]);
  }

  bool on_boundary(std::size_t flat) const {
    for (int axis = 0; axis < e; ++axis) {
      const int j = index(flat, axis);
      if (j == 0 || j == space.nodes[axis] - 1) return true;
    }
    return false;
  }

  // Neighbour one step inward along every axis on which the node is extreme.
  std::size_t inward(std::size_t flat) const {
    std::size_t out = flat;
    for (int axis = 0; axis < e; ++axis) {
      const int j = index(flat, axis);
      if (j == 0) out += stride[axis];
      if (j == space.nodes[axis] - 1) out -= stride[axis];
    }
    return out;
  }
};

// Interior rows of the discrete operator L; boundary rows are left empty.
void assemble_operator(const Stencil& st, std::span<const double> a, std::span<const double> b,
                       std::vector<Triplet>& out) {
  const int e = st.e;
  const std::size_t n = st.space.size();
  out.clear();
  for (std::size_t r = 0; r < n; ++r) {
    if (st.on_boundary(r)) continue;
    const int row = static_cast<int>(r);
    const double* ar = a.data() + r * e * e;
    const double* br = b.data() + r * e;
    for (int axis = 0; axis < e; ++axis) {
      const double h = st.h[axis];
      const int s = st.stride[axis];
      const double diff = 0.5 * ar[axis * e + axis];
      const double beta = br[axis];
      double lo = diff / (h * h);
      double hi = diff / (h * h);
      double mid = -2.0 * diff / (h * h);
      const double peclet = diff > 0.0 ? std::abs(beta) * h / diff : std::numeric_limits<double>::infinity();
      if (peclet <= 2.0) {
        lo -= beta / (2.0 * h);
        hi += beta / (2.0 * h);
      } else if (beta > 0.0) {
        hi += beta / h;
        mid -= beta / h;
      } else {
        lo -= beta / h;
        mid += beta / h;
      }
      out.emplace_back(row, row - s, lo);
      out.emplace_back(row, row, mid);
      out.emplace_back(row, row + s, hi);
    }
    for (int p = 0; p < e; ++p) {
      for (int q = p + 1; q < e; ++q) {
        const double cross = 0.5 * (ar[p * e + q] + ar[q * e + p]) / (4.0 * st.h[p] * st.h[q]);
        if (cross == 0.0) continue;
        const int sp = st.stride[p];
        const int sq = st.stride[q];
        out.emplace_back(row, row + sp + sq, cross);
        out.emplace_back(row, row - sp - sq, cross);
        out.emplace_back(row, row + sp - sq, -cross);
        out.emplace_back(row, row - sp + sq, -cross);
      }
    }
  }
}

double max_courant(const Stencil& st, std::span<const double> b, double dt) {
  double worst = 0.0;
  for (std::size_t r = 0; r < st.space.size(); ++r) {
    for (int axis = 0; axis < st.e; ++axis) {
      worst = std::max(worst, std::abs(b[r * st.e + axis]) * dt / st.h[axis]);
    }
  }
  return worst;
}

class ThetaStepper {
 public:
  ThetaStepper(const SpaceGrid& space, std::span<const double> boundary_values,
               const ParabolicOptions& options)
      : st_(space), boundary_(boundary_values.begin(), boundary_values.end()), options_(options) {
    n_ = static_cast<int>(space.size());
  }

  void step(std::vector<double>& u, std::span<const double> a0, std::span<const double> b0,
            std::span<const double> a1, std::span<const double> b1, double dt) {
    const double theta = options_.theta;
    assemble_operator(st_, a0, b0, trip_);
    SparseMatrix l0(n_, n_);
    l0.setFromTriplets(trip_.begin(), trip_.end());
    Eigen::Map<const Eigen::VectorXd> uv(u.data(), n_);
    Eigen::VectorXd rhs = uv + (1.0 - theta) * dt * (l0 * uv);

    assemble_operator(st_, a1, b1, trip_);
    for (auto& t : trip_) t = Triplet(t.row(), t.col(), -theta * dt * t.value());
    for (int r = 0; r < n_; ++r) {
      if (!st_.on_boundary(r)) {
        trip_.emplace_back(r, r, 1.0);
        continue;
      }
      trip_.emplace_back(r, r, 1.0);
      if (options_.boundary == BoundaryCondition::dirichlet) {
        rhs[r] = boundary_[r];
      } else {
        trip_.emplace_back(r, static_cast<int>(st_.inward(r)), -1.0);
        rhs[r] = 0.0;
      }
    }
    SparseMatrix m(n_, n_);
    m.setFromTriplets(trip_.begin(), trip_.end());
    m.makeCompressed();
    if (!analyzed_) {
      lu_.analyzePattern(m);
      analyzed_ = true;
    }
    lu_.factorize(m);
    if (lu_.info() != Eigen::Success) {
      throw Error(ErrorCode::linear_solve_failed, "theta-scheme matrix factorization failed");
    }
    Eigen::VectorXd next = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success || !next.allFinite()) {
      throw Error(ErrorCode::linear_solve_failed, "theta-scheme solve failed");
    }
    for (int r = 0; r < n_; ++r) u[r] = next[r];
  }

  const Stencil& stencil() const { return st_; }

 private:
  Stencil st_;
  std::vector<double> boundary_;
  ParabolicOptions options_;
  int n_ = 0;
  std::vector<Triplet> trip_;
  Eigen::SparseLU<SparseMatrix> lu_;
  bool analyzed_ = false;
};

}  // namespace

ParabolicResult solve_parabolic(CoefficientSource& source, const InitialDatum& phi,
                                const SpaceGrid& space, std::span<const double> times,
                                std::span<const double> output_times,
                                const ParabolicOptions& options) {
  const int e = space.dim();
  if (e < 1 || e > 2) throw Error(ErrorCode::invalid_argument, "parabolic solver supports e in {1, 2}");
  if (phi.dim != e) throw Error(ErrorCode::dimension_mismatch, "datum and grid disagree");
  for (int axis = 0; axis < e; ++axis) {
    if (space.nodes[axis] < 3) throw Error(ErrorCode::invalid_argument, "grid needs >= 3 nodes per axis");
  }
  if (times.size() < 1 || times[0] != 0.0) throw Error(ErrorCode::invalid_argument, "time grid must start at 0");
  if (!(options.theta >= 0.0 && options.theta <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "theta must lie in [0, 1]");
  }
  std::vector<std::size_t> wanted;
  for (double t : output_times) wanted.push_back(grid_index(times, t));
  if (!std::is_sorted(wanted.begin(), wanted.end())) {
    throw Error(ErrorCode::non_monotone_times, "output times must be increasing");
  }

  const std::size_t n = space.size();
  const auto pts = space.points();
  std::vector<double> u(n);
  for (std::size_t j = 0; j < n; ++j) u[j] = phi.value(std::span<const double>(pts).subspan(j * e, e));
  const double lo = *std::min_element(u.begin(), u.end());
  const double hi = *std::max_element(u.begin(), u.end());

  ParabolicResult result;
  result.field.space = space;
  result.field.times.assign(output_times.begin(), output_times.end());
  result.field.values.resize(output_times.size() * n);
  std::size_t next_out = 0;
  auto record = [&](std::size_t k) {
    while (next_out < wanted.size() && wanted[next_out] == k) {
      std::copy(u.begin(), u.end(), result.field.at_time(next_out).begin());
      ++next_out;
    }
  };
  record(0);
  if (next_out == wanted.size()) return result;

  ThetaStepper stepper(space, u, options);
  std::vector<double> a0, b0, a1, b1;
  const std::size_t last = wanted.back();
  for (std::size_t k = 0; k < last; ++k) {
    const double dt = times[k + 1] - times[k];
    source.evaluate(k, 0.0, a0, b0);
    const double courant = max_courant(stepper.stencil(), b0, dt);
    int sub = std::max(1, static_cast<int>(std::ceil(courant / options.max_courant - 1e-12)));
    if (sub > 1) {
      source.evaluate(k, 1.0, a1, b1);
      sub = std::max(sub, static_cast<int>(std::ceil(max_courant(stepper.stencil(), b1, dt) /
                                                     options.max_courant - 1e-12)));
    }
    if (sub > options.max_substeps) {
      throw Error(ErrorCode::cfl_violation, "advection too strong for the substep budget");
    }
    result.max_substeps_used = std::max(result.max_substeps_used, sub);
    for (int s = 0; s < sub; ++s) {
      source.evaluate(k, static_cast<double>(s + 1) / sub, a1, b1);
      stepper.step(u, a0, b0, a1, b1, dt / sub);
      std::swap(a0, a1);
      std::swap(b0, b1);
      for (double val : u) result.range_slack = std::max({result.range_slack, val - hi, lo - val});
    }
    record(k + 1);
  }
  return result;
}

ScalarField solve_parabolic(const EllipticCoefficients& c, const InitialDatum& phi,
                            const SpaceGrid& space, double dt, std::span<const double> output_times,
                            const ParabolicOptions& options) {
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "dt must be positive");
  const double horizon = output_times.empty() ? 0.0 : output_times.back();
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) times[k] = horizon * static_cast<double>(k) / std::max<std::size_t>(steps, 1);
  // Snap the requested output times onto this grid.
  std::vector<double> outs;
  for (double t : output_times) {
    const auto k = static_cast<std::size_t>(std::llround(t / dt));
    if (std::abs(k * dt - t) > 1e-9 * std::max(1.0, horizon)) {
      throw Error(ErrorCode::not_on_grid, "output time is not a multiple of dt");
    }
    outs.push_back(times[std::min(k, steps)]);
  }
  PlainCoefficientSource source(c, space, times);
  auto result = solve_parabolic(source, phi, space, times, outs, options);
  result.field.times.assign(output_times.begin(), output_times.end());
  return std::move(result.field);
}

void write_diagnostics_csv(std::ostream& out, const std::vector<DiagnosticsRow>& rows) {
  out << "t,ellipticity_lower_bound,jacobian_cond_max,out_of_box_fraction\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r.t, r.ellipticity_lower_bound,
                  r.jacobian_cond_max, r.out_of_box_fraction);
    out << buf;
  }
}

bool interpolate(const SpaceGrid& space, std::span<const double> values, std::span<const double> y,
                 double& out) {
  const int e = space.dim();
  bool inside = true;
  int base[4];
  double w[4];
  for (int axis = 0; axis < e; ++axis) {
    const double h = space.spacing(axis);
    double pos = (y[axis] - space.lo[axis]) / h;
    const double top = space.nodes[axis] - 1;
    if (pos < -1e-9 || pos > top + 1e-9) inside = false;
    pos = std::clamp(pos, 0.0, top);
    const double nearest = std::round(pos);
    if (std::abs(pos - nearest) < 1e-9) pos = nearest;
    int j = static_cast<int>(std::floor(pos));
    if (j >= space.nodes[axis] - 1) j = space.nodes[axis] - 2;
    base[axis] = j;
    w[axis] = pos - j;
  }
  double acc = 0.0;
  for (int corner = 0; corner < (1 << e); ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (int axis = 0; axis < e; ++axis) {
      const int bit = (corner >> axis) & 1;
      weight *= bit ? w[axis] : 1.0 - w[axis];
      flat = flat * space.nodes[axis] + base[axis] + bit;
    }
    if (weight != 0.0) acc += weight * values[flat];
  }
  out = acc;
  return inside;
}

ScalarField resample_field(const ScalarField& field, const SpaceGrid& target) {
  ScalarField out;
  out.space = target;
  out.times = field.times;
  out.values.resize(field.times.size() * target.size());
  const int e = target.dim();
  const auto pts = target.points();
  for (std::size_t i = 0; i < field.times.size(); ++i) {
    auto dst = out.at_time(i);
    for (std::size_t j = 0; j < target.size(); ++j) {
      interpolate(field.space, field.at_time(i), std::span<const double>(pts).subspan(j * e, e), dst[j]);
    }
  }
  return out;
}

SecondOrderResult solve_second_order_rpde(const EllipticCoefficients& c, const VectorFieldSet& v,
                                          const InitialDatum& phi, const RoughPathGrid& x,
                                          const SpaceGrid& solver_box, const SpaceGrid& evaluation,
                                          std::span<const double> output_times,
                                          const ParabolicOptions& options, const RdeOptions& rde,
                                          Execution exec) {
  const int e = solver_box.dim();
  if (evaluation.dim() != e || c.dim != e || v.state_dim() != e || phi.dim != e) {
    throw Error(ErrorCode::dimension_mismatch, "grids, coefficients, fields and datum disagree");
  }
  TransformedCoefficientSource source(c, v, x, solver_box, rde, exec);
  auto parabolic = solve_parabolic(source, phi, solver_box, x.times(), output_times, options);

  SecondOrderResult out;
  out.v = std::move(parabolic.field);
  out.range_slack = parabolic.range_slack;
  out.u.space = evaluation;
  out.u.times = out.v.times;
  out.u.values.resize(out.u.times.size() * evaluation.size());
  const auto pts = evaluation.points();
  const auto n = evaluation.size();
  std::vector<double> center(e), radius(e);
  for (int axis = 0; axis < e; ++axis) {
    center[axis] = 0.5 * (solver_box.lo[axis] + solver_box.hi[axis]);
    radius[axis] = 0.5 * (solver_box.hi[axis] - solver_box.lo[axis]);
  }
  for (std::size_t i = 0; i < out.u.times.size(); ++i) {
    const double t = out.u.times[i];
    const std::size_t k = x.index_of(t);
    std::vector<double> zeta = k == 0 ? pts : inverse_flow_batch(v, pts, x, t, rde, exec);
    auto dst = out.u.at_time(i);
    const auto src = out.v.at_time(i);
    std::size_t outside = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto z = std::span<const double>(zeta).subspan(j * e, e);
      if (!interpolate(solver_box, src, z, dst[j])) ++outside;
      for (int axis = 0; axis < e; ++axis) {
        const double slack = (radius[axis] - std::abs(z[axis] - center[axis])) / radius[axis];
        out.margin_fraction = std::min(out.margin_fraction, slack);
      }
    }
    DiagnosticsRow row;
    row.t = t;
    row.ellipticity_lower_bound = source.ellipticity()[k];
    if (std::isnan(row.ellipticity_lower_bound)) row.ellipticity_lower_bound = c.ellipticity;
    row.jacobian_cond_max = k == 0 ? 1.0 : source.condition()[k];
    row.out_of_box_fraction = static_cast<double>(outside) / static_cast<double>(n);
    out.diagnostics.push_back(row);
  }
  out.margin_ok = out.margin_fraction >= 0.2;
  return out;
}

namespace {

// a, b at the nodes plus -V(y) dx/dt from the current linear piece of x.
class DirectSource final : public CoefficientSource {
 public:
  DirectSource(const EllipticCoefficients& c, const VectorFieldSet& v, const RoughPathGrid& x,
               const SpaceGrid& space, Execution exec)
      : plain_(c, space, x.times(), exec), x_(x), e_(space.dim()), d_(v.fields()) {
    const auto pts = space.points();
    const std::size_t n = space.size();
    fields_.resize(n * d_ * e_);
    FieldDerivatives f;
    for (std::size_t j = 0; j < n; ++j) {
      v.evaluate(std::span<const double>(pts).subspan(j * e_, e_), 0, f);
      for (int i = 0; i < d_; ++i) {
        for (int a = 0; a < e_; ++a) fields_[(j * d_ + i) * e_ + a] = f.value(i, a);
      }
    }
  }

  void evaluate(std::size_t segment, double fraction, std::vector<double>& a,
                std::vector<double>& b) override {
    plain_.evaluate(segment, fraction, a, b);
    const double dt = x_.times()[segment + 1] - x_.times()[segment];
    const auto l0 = x_.point(segment).level(1);
    const auto l1 = x_.point(segment + 1).level(1);
    std::vector<double> rate(d_);
    for (int i = 0; i < d_; ++i) rate[i] = (l1[i] - l0[i]) / dt;
    const std::size_t n = b.size() / e_;
    for (std::size_t j = 0; j < n; ++j) {
      for (int i = 0; i < d_; ++i) {
        for (int c = 0; c < e_; ++c) b[j * e_ + c] -= fields_[(j * d_ + i) * e_ + c] * rate[i];
      }
    }
  }

 private:
  PlainCoefficientSource plain_;
  const RoughPathGrid& x_;
  int e_;
  int d_;
  std::vector<double> fields_;
};

}  // namespace

ScalarField solve_direct_lipschitz(const EllipticCoefficients& c, const VectorFieldSet& v,
                                   const InitialDatum& phi, const RoughPathGrid& x,
                                   const SpaceGrid& space, std::span<const double> output_times,
                                   const ParabolicOptions& options, Execution exec) {
  if (space.dim() != c.dim || v.state_dim() != c.dim) {
    throw Error(ErrorCode::dimension_mismatch, "grid, coefficients and fields disagree");
  }
  if (v.fields() != x.dim()) throw Error(ErrorCode::dimension_mismatch, "driver and fields disagree");
  DirectSource source(c, v, x, space, exec);
  return std::move(solve_parabolic(source, phi, space, x.times(), output_times, options).field);
}

}  // namespace roughpde
