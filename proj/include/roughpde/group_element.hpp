#pragma once

#include <span>
#include <vector>

namespace roughpde {

inline constexpr int kMaxStep = 3;

// Dense levels 1..N of a truncated tensor over R^d. Level k is stored row-major
// with d^k entries; index (i, j) of level 2 is the word "i then j".
class TensorLevels {
 public:
  TensorLevels(int dim, int step);

  int dim() const noexcept { return dim_; }
  int step() const noexcept { return step_; }

  std::span<double> level(int k);
  std::span<const double> level(int k) const;

  std::span<double> coefficients() noexcept { return coeffs_; }
  std::span<const double> coefficients() const noexcept { return coeffs_; }

  double& operator()(int i) { return coeffs_[i]; }
  double operator()(int i) const { return coeffs_[i]; }
  double& operator()(int i, int j) { return coeffs_[offset_[1] + i * dim_ + j]; }
  double operator()(int i, int j) const { return coeffs_[offset_[1] + i * dim_ + j]; }
  double& operator()(int i, int j, int k) {
    return coeffs_[offset_[2] + (i * dim_ + j) * dim_ + k];
  }
  double operator()(int i, int j, int k) const {
    return coeffs_[offset_[2] + (i * dim_ + j) * dim_ + k];
  }

  bool operator==(const TensorLevels&) const = default;

 private:
  int dim_;
  int step_;
  int offset_[kMaxStep + 1]{};
  std::vector<double> coeffs_;
};

// Element of the step-N free nilpotent group G^N(R^d): a truncated tensor with
// implicit scalar part 1.
class GroupElement : public TensorLevels {
 public:
  using TensorLevels::TensorLevels;

  static GroupElement identity(int dim, int step) { return GroupElement(dim, step); }

  bool operator==(const GroupElement&) const = default;
};

// Element of the free step-N nilpotent Lie algebra: a truncated tensor with
// scalar part 0 whose levels are Lie polynomials.
class LieElement : public TensorLevels {
 public:
  using TensorLevels::TensorLevels;

  bool operator==(const LieElement&) const = default;
};

GroupElement multiply(const GroupElement& g, const GroupElement& h);
GroupElement inverse(const GroupElement& g);

GroupElement exp(const LieElement& a, double tolerance = 1e-10);
LieElement log(const GroupElement& g);

// Signature of the straight segment with increment `delta`.
GroupElement segment_signature(std::span<const double> delta, int step);

double homogeneous_norm(const GroupElement& g);
GroupElement dilate(double eps, const GroupElement& g);
double group_distance(const GroupElement& g, const GroupElement& h);

// Largest violation of the Lie-polynomial conditions: antisymmetry at level 2,
// Dynkin fixed point r(P) = 3P at level 3.
double lie_defect(const LieElement& a);
bool is_lie(const LieElement& a, double tolerance = 1e-10);

// Group-likeness measured as lie_defect(log(g)).
double group_like_defect(const GroupElement& g);
bool is_group_like(const GroupElement& g, double tolerance = 1e-10);

// Frobenius norm of every coefficient difference.
double coefficient_distance(const TensorLevels& a, const TensorLevels& b);

}  // namespace roughpde
