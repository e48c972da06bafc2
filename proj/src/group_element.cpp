#include "roughpde/group_element.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "roughpde/error.hpp"

namespace roughpde {

TensorLevels::TensorLevels(int dim, int step) : dim_(dim), step_(step) {
  if (dim < 1) throw Error(ErrorCode::invalid_argument, "dimension must be >= 1");
  if (step < 1 || step > kMaxStep) {
    throw Error(ErrorCode::invalid_argument,
                "step must be in 1.." + std::to_string(kMaxStep) + ", got " + std::to_string(step));
  }
  int total = 0;
  int width = 1;
  for (int k = 0; k < step; ++k) {
    offset_[k] = total;
    width *= dim;
    total += width;
  }
  offset_[step] = total;
  coeffs_.assign(total, 0.0);
}

std::span<double> TensorLevels::level(int k) {
  return std::span<double>(coeffs_).subspan(offset_[k - 1], offset_[k] - offset_[k - 1]);
}

std::span<const double> TensorLevels::level(int k) const {
  return std::span<const double>(coeffs_).subspan(offset_[k - 1], offset_[k] - offset_[k - 1]);
}

namespace {

void check_compatible(const TensorLevels& a, const TensorLevels& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::dimension_mismatch, "dimensions " + std::to_string(a.dim()) + " and " +
                                                   std::to_string(b.dim()));
  }
  if (a.step() != b.step()) {
    throw Error(ErrorCode::step_mismatch,
                "steps " + std::to_string(a.step()) + " and " + std::to_string(b.step()));
  }
}

// Truncated product of (a0 + A) and (b0 + B); the scalar part of the result is a0 * b0.
template <class Out>
Out truncated_product(double a0, const TensorLevels& a, double b0, const TensorLevels& b) {
  Out out(a.dim(), a.step());
  const int n = a.step();
  for (int k = 1; k <= n; ++k) {
    auto dst = out.level(k);
    auto ak = a.level(k);
    auto bk = b.level(k);
    for (std::size_t w = 0; w < dst.size(); ++w) dst[w] = a0 * bk[w] + ak[w] * b0;
    for (int i = 1; i < k; ++i) {
      auto left = a.level(i);
      auto right = b.level(k - i);
      std::size_t w = 0;
      for (double l : left) {
        for (double r : right) dst[w++] += l * r;
      }
    }
  }
  return out;
}

template <class Out>
Out add_scaled(const TensorLevels& a, double alpha, const TensorLevels& b, double beta) {
  Out out(a.dim(), a.step());
  auto dst = out.coefficients();
  auto x = a.coefficients();
  auto y = b.coefficients();
  for (std::size_t w = 0; w < dst.size(); ++w) dst[w] = alpha * x[w] + beta * y[w];
  return out;
}

double frobenius(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

GroupElement multiply(const GroupElement& g, const GroupElement& h) {
  check_compatible(g, h);
  return truncated_product<GroupElement>(1.0, g, 1.0, h);
}

GroupElement inverse(const GroupElement& g) {
  // (1 + Y)^{-1} = 1 - Y + Y^2 - Y^3 in the truncated algebra.
  const TensorLevels& y = g;
  TensorLevels y2 = truncated_product<TensorLevels>(0.0, y, 0.0, y);
  TensorLevels y3 = truncated_product<TensorLevels>(0.0, y2, 0.0, y);
  GroupElement out(g.dim(), g.step());
  auto dst = out.coefficients();
  auto c1 = y.coefficients();
  auto c2 = y2.coefficients();
  auto c3 = y3.coefficients();
  for (std::size_t w = 0; w < dst.size(); ++w) dst[w] = -c1[w] + c2[w] - c3[w];
  return out;
}

GroupElement exp(const LieElement& a, double tolerance) {
  if (a.step() >= 2 && !is_lie(a, tolerance)) {
    throw Error(ErrorCode::not_lie_element,
                "input is not a Lie element (defect " + std::to_string(lie_defect(a)) + ")");
  }
  const TensorLevels& x = a;
  TensorLevels x2 = truncated_product<TensorLevels>(0.0, x, 0.0, x);
  TensorLevels x3 = truncated_product<TensorLevels>(0.0, x2, 0.0, x);
  GroupElement out(a.dim(), a.step());
  auto dst = out.coefficients();
  auto c1 = x.coefficients();
  auto c2 = x2.coefficients();
  auto c3 = x3.coefficients();
  for (std::size_t w = 0; w < dst.size(); ++w) dst[w] = c1[w] + c2[w] / 2.0 + c3[w] / 6.0;
  return out;
}

LieElement log(const GroupElement& g) {
  const TensorLevels& y = g;
  TensorLevels y2 = truncated_product<TensorLevels>(0.0, y, 0.0, y);
  TensorLevels y3 = truncated_product<TensorLevels>(0.0, y2, 0.0, y);
  LieElement out(g.dim(), g.step());
  auto dst = out.coefficients();
  auto c1 = y.coefficients();
  auto c2 = y2.coefficients();
  auto c3 = y3.coefficients();
  for (std::size_t w = 0; w < dst.size(); ++w) dst[w] = c1[w] - c2[w] / 2.0 + c3[w] / 3.0;
  return out;
}

GroupElement segment_signature(std::span<const double> delta, int step) {
  const int d = static_cast<int>(delta.size());
  GroupElement out(d, step);
  auto l1 = out.level(1);
  std::copy(delta.begin(), delta.end(), l1.begin());
  for (int k = 2; k <= step; ++k) {
    auto prev = out.level(k - 1);
    auto cur = out.level(k);
    std::size_t w = 0;
    for (double p : prev) {
      for (double x : delta) cur[w++] = p * x / k;
    }
  }
  return out;
}

double homogeneous_norm(const GroupElement& g) {
  double norm = 0.0;
  for (int k = 1; k <= g.step(); ++k) {
    norm = std::max(norm, std::pow(frobenius(g.level(k)), 1.0 / k));
  }
  return norm;
}

GroupElement dilate(double eps, const GroupElement& g) {
  GroupElement out = g;
  double scale = 1.0;
  for (int k = 1; k <= g.step(); ++k) {
    scale *= eps;
    for (double& x : out.level(k)) x *= scale;
  }
  return out;
}

double group_distance(const GroupElement& g, const GroupElement& h) {
  const GroupElement diff = multiply(inverse(g), h);
  // Level-3 roundoff would otherwise surface as ~1e-5 after the cube root.
  if (g == h) return 0.0;
  return homogeneous_norm(diff);
}

double lie_defect(const LieElement& a) {
  const int d = a.dim();
  double defect = 0.0;
  if (a.step() >= 2) {
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) defect = std::max(defect, std::abs(a(i, j) + a(j, i)));
    }
  }
  if (a.step() >= 3) {
    // Dynkin map on words of length 3: ijk -> [[i,j],k] = ijk - jik - kij + kji.
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        for (int k = 0; k < d; ++k) {
          // Coefficient of the word ijk in r(P).
          const double r = a(i, j, k) - a(j, i, k) - a(j, k, i) + a(k, j, i);
          defect = std::max(defect, std::abs(r - 3.0 * a(i, j, k)));
        }
      }
    }
  }
  return defect;
}

bool is_lie(const LieElement& a, double tolerance) { return lie_defect(a) <= tolerance; }

double group_like_defect(const GroupElement& g) { return lie_defect(log(g)); }

bool is_group_like(const GroupElement& g, double tolerance) {
  return group_like_defect(g) <= tolerance;
}

double coefficient_distance(const TensorLevels& a, const TensorLevels& b) {
  check_compatible(a, b);
  return frobenius(add_scaled<TensorLevels>(a, 1.0, b, -1.0).coefficients());
}

}  // namespace roughpde
