#pragma once

#include <array>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace roughpde {

inline constexpr int kMaxDerivativeOrder = 4;

// Values and spatial derivatives of d vector fields on R^e at one point.
// Order m holds d * e^{m+1} entries indexed (field, component, b_1, ..., b_m).
struct FieldDerivatives {
  int fields = 0;
  int state_dim = 0;
  int order = -1;
  std::vector<double> data[kMaxDerivativeOrder + 1];

  void resize(int d, int e, int max_order);

  double& value(int i, int a) { return data[0][i * state_dim + a]; }
  double value(int i, int a) const { return data[0][i * state_dim + a]; }
  double& d1(int i, int a, int b) { return data[1][(i * state_dim + a) * state_dim + b]; }
  double d1(int i, int a, int b) const { return data[1][(i * state_dim + a) * state_dim + b]; }
  double& d2(int i, int a, int b, int c) {
    return data[2][((i * state_dim + a) * state_dim + b) * state_dim + c];
  }
  double d2(int i, int a, int b, int c) const {
    return data[2][((i * state_dim + a) * state_dim + b) * state_dim + c];
  }
};

// V = (V_1, ..., V_d) on R^e with closed-form derivatives up to smoothness().
class VectorFieldSet {
 public:
  virtual ~VectorFieldSet() = default;

  virtual int fields() const = 0;
  virtual int state_dim() const = 0;
  virtual int smoothness() const = 0;

  // Fills orders 0..order of out; order must not exceed smoothness().
  virtual void evaluate(std::span<const double> y, int order, FieldDerivatives& out) const = 0;
};

using FieldPtr = std::shared_ptr<const VectorFieldSet>;

enum class RidgeProfile { linear, sine };

// One term coef * g(<wave, y> + phase) contributing to component `component`
// of field `field`; g is the identity (linear) or sin.
struct RidgeTerm {
  int field = 0;
  int component = 0;
  double coef = 0.0;
  RidgeProfile profile = RidgeProfile::linear;
  std::vector<double> wave;
  double phase = 0.0;
};

// Sums of ridge terms. Covers constant, linear and trigonometric fields, with
// derivatives of every order available in closed form.
class RidgeFieldSet final : public VectorFieldSet {
 public:
  RidgeFieldSet(int fields, int state_dim, std::vector<RidgeTerm> terms);

  int fields() const override { return fields_; }
  int state_dim() const override { return state_dim_; }
  int smoothness() const override { return kMaxDerivativeOrder; }
  void evaluate(std::span<const double> y, int order, FieldDerivatives& out) const override;

 private:
  int fields_;
  int state_dim_;
  std::vector<RidgeTerm> terms_;
  std::vector<std::array<std::vector<double>, kMaxDerivativeOrder + 1>> powers_;
};

// The fields (c[V_1, V_2], V_1, V_2) driven by the time-space path (t, B).
// Bracket convention: [V_1, V_2] = DV_2 V_1 - DV_1 V_2.
class BracketDriftFieldSet final : public VectorFieldSet {
 public:
  BracketDriftFieldSet(FieldPtr base, double c);

  int fields() const override { return 3; }
  int state_dim() const override { return base_->state_dim(); }
  int smoothness() const override { return std::min(base_->smoothness() - 1, 2); }
  void evaluate(std::span<const double> y, int order, FieldDerivatives& out) const override;

 private:
  FieldPtr base_;
  double c_;
};

// [V_i, V_j](y) = DV_j V_i - DV_i V_j.
std::vector<double> lie_bracket(const VectorFieldSet& v, int i, int j, std::span<const double> y);

// Largest deviation of each analytic derivative order from central finite
// differences of the order below, over the probe points.
double derivative_check_error(const VectorFieldSet& v,
                              const std::vector<std::vector<double>>& probes, double h = 1e-4);

using PresetParams = std::map<std::string, double>;

// Named presets: zero, constant, linear, sine, nonlinear2d, rotation, commuting.
// Derivatives are verified against finite differences (h = 1e-4, tolerance
// 1e-5) on probe points before the field set is returned.
FieldPtr make_vector_fields(const std::string& name, const PresetParams& params = {});

}  // namespace roughpde
