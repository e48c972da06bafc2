#include "roughpde/vector_fields.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "roughpde/error.hpp"

namespace roughpde {

void FieldDerivatives::resize(int d, int e, int max_order) {
  fields = d;
  state_dim = e;
  order = max_order;
  std::size_t width = static_cast<std::size_t>(d) * e;
  for (int m = 0; m <= kMaxDerivativeOrder; ++m) {
    if (m <= max_order) {
      data[m].assign(width, 0.0);
    } else {
      data[m].clear();
    }
    width *= e;
  }
}

RidgeFieldSet::RidgeFieldSet(int fields, int state_dim, std::vector<RidgeTerm> terms)
    : fields_(fields), state_dim_(state_dim), terms_(std::move(terms)) {
  if (fields < 1 || state_dim < 1) throw Error(ErrorCode::invalid_argument, "empty field set");
  for (auto& t : terms_) {
    if (t.field < 0 || t.field >= fields || t.component < 0 || t.component >= state_dim) {
      throw Error(ErrorCode::invalid_argument, "ridge term index out of range");
    }
    if (t.wave.empty()) t.wave.assign(state_dim, 0.0);
    if (static_cast<int>(t.wave.size()) != state_dim) {
      throw Error(ErrorCode::dimension_mismatch, "ridge wave vector has wrong length");
    }
  }
  // powers_[n][m] = wave^{(x) m} of term n.
  powers_.resize(terms_.size());
  for (std::size_t n = 0; n < terms_.size(); ++n) {
    powers_[n][0] = {1.0};
    for (int m = 1; m <= kMaxDerivativeOrder; ++m) {
      const auto& prev = powers_[n][m - 1];
      auto& cur = powers_[n][m];
      cur.resize(prev.size() * state_dim);
      for (std::size_t w = 0; w < prev.size(); ++w) {
        for (int b = 0; b < state_dim; ++b) cur[w * state_dim + b] = prev[w] * terms_[n].wave[b];
      }
    }
  }
}

void RidgeFieldSet::evaluate(std::span<const double> y, int order, FieldDerivatives& out) const {
  if (static_cast<int>(y.size()) != state_dim_) {
    throw Error(ErrorCode::dimension_mismatch, "point has wrong dimension");
  }
  if (order > kMaxDerivativeOrder) throw Error(ErrorCode::invalid_argument, "order too high");
  out.resize(fields_, state_dim_, order);
  const int e = state_dim_;
  for (std::size_t n = 0; n < terms_.size(); ++n) {
    const auto& t = terms_[n];
    double s = t.phase;
    for (int b = 0; b < e; ++b) s += t.wave[b] * y[b];
    // Derivatives of sin cycle through sin, cos, -sin, -cos.
    double cycle[4] = {0.0, 0.0, 0.0, 0.0};
    if (t.profile == RidgeProfile::sine) {
      cycle[0] = std::sin(s);
      cycle[1] = std::cos(s);
      cycle[2] = -cycle[0];
      cycle[3] = -cycle[1];
    }
    for (int m = 0; m <= order; ++m) {
      double g = 0.0;
      if (t.profile == RidgeProfile::linear) {
        g = m == 0 ? s : (m == 1 ? 1.0 : 0.0);
      } else {
        g = cycle[m % 4];
      }
      if (g == 0.0) continue;
      const auto& outer = powers_[n][m];
      const std::size_t base = static_cast<std::size_t>(t.field * e + t.component) * outer.size();
      const double w = t.coef * g;
      for (std::size_t k = 0; k < outer.size(); ++k) out.data[m][base + k] += w * outer[k];
    }
  }
}

BracketDriftFieldSet::BracketDriftFieldSet(FieldPtr base, double c) : base_(std::move(base)), c_(c) {
  if (!base_ || base_->fields() != 2) {
    throw Error(ErrorCode::dimension_mismatch, "bracket drift needs exactly two base fields");
  }
  if (base_->smoothness() < 2) throw Error(ErrorCode::invalid_argument, "base fields not smooth enough");
}

void BracketDriftFieldSet::evaluate(std::span<const double> y, int order, FieldDerivatives& out) const {
  if (order > smoothness()) throw Error(ErrorCode::invalid_argument, "order too high");
  FieldDerivatives base;
  base_->evaluate(y, order + 1, base);
  const int e = base_->state_dim();
  out.resize(3, e, order);
  for (int m = 0; m <= order; ++m) {
    const std::size_t per_field = base.data[m].size() / 2;
    std::copy(base.data[m].begin(), base.data[m].end(), out.data[m].begin() + per_field);
  }
  // Terms of c * (DV_q V_r - DV_r V_q) with (q, r) = (2, 1) minus (1, 2).
  for (int sign = 0; sign < 2; ++sign) {
    const int q = sign == 0 ? 1 : 0;
    const int r = 1 - q;
    const double w = sign == 0 ? c_ : -c_;
    for (int a = 0; a < e; ++a) {
      for (int b = 0; b < e; ++b) {
        out.value(0, a) += w * base.d1(q, a, b) * base.value(r, b);
        if (order < 1) continue;
        for (int c = 0; c < e; ++c) {
          out.d1(0, a, c) += w * (base.d2(q, a, b, c) * base.value(r, b) +
                                  base.d1(q, a, b) * base.d1(r, b, c));
          if (order < 2) continue;
          for (int d = 0; d < e; ++d) {
            const auto d3 = [&](int i, int aa, int bb, int cc, int dd) {
              return base.data[3][(((i * e + aa) * e + bb) * e + cc) * e + dd];
            };
            out.d2(0, a, c, d) +=
                w * (d3(q, a, b, c, d) * base.value(r, b) + base.d2(q, a, b, c) * base.d1(r, b, d) +
                     base.d2(q, a, b, d) * base.d1(r, b, c) + base.d1(q, a, b) * base.d2(r, b, c, d));
          }
        }
      }
    }
  }
}

std::vector<double> lie_bracket(const VectorFieldSet& v, int i, int j, std::span<const double> y) {
  FieldDerivatives f;
  v.evaluate(y, 1, f);
  const int e = v.state_dim();
  std::vector<double> out(e, 0.0);
  for (int a = 0; a < e; ++a) {
    for (int b = 0; b < e; ++b) out[a] += f.d1(j, a, b) * f.value(i, b) - f.d1(i, a, b) * f.value(j, b);
  }
  return out;
}

double derivative_check_error(const VectorFieldSet& v,
                              const std::vector<std::vector<double>>& probes, double h) {
  const int e = v.state_dim();
  const int top = std::min(v.smoothness(), kMaxDerivativeOrder);
  double worst = 0.0;
  FieldDerivatives center;
  FieldDerivatives plus;
  FieldDerivatives minus;
  for (const auto& y : probes) {
    v.evaluate(y, top, center);
    for (int b = 0; b < e; ++b) {
      std::vector<double> yp = y;
      std::vector<double> ym = y;
      yp[b] += h;
      ym[b] -= h;
      v.evaluate(yp, top, plus);
      v.evaluate(ym, top, minus);
      for (int m = 1; m <= top; ++m) {
        const auto& lower_p = plus.data[m - 1];
        const auto& lower_m = minus.data[m - 1];
        for (std::size_t idx = 0; idx < lower_p.size(); ++idx) {
          const double fd = (lower_p[idx] - lower_m[idx]) / (2.0 * h);
          worst = std::max(worst, std::abs(fd - center.data[m][idx * e + b]));
        }
      }
    }
  }
  return worst;
}

namespace {

double param(const PresetParams& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

int int_param(const PresetParams& p, const std::string& key, int fallback) {
  return static_cast<int>(std::lround(param(p, key, fallback)));
}

RidgeTerm constant_term(int field, int component, double value) {
  RidgeTerm t;
  t.field = field;
  t.component = component;
  t.coef = 1.0;
  t.phase = value;
  return t;
}

RidgeTerm linear_term(int field, int component, std::vector<double> row, double coef = 1.0) {
  RidgeTerm t;
  t.field = field;
  t.component = component;
  t.coef = coef;
  t.wave = std::move(row);
  return t;
}

RidgeTerm sine_term(int field, int component, double coef, std::vector<double> wave, double phase) {
  RidgeTerm t;
  t.field = field;
  t.component = component;
  t.coef = coef;
  t.profile = RidgeProfile::sine;
  t.wave = std::move(wave);
  t.phase = phase;
  return t;
}

std::vector<double> unit(int e, int k, double scale = 1.0) {
  std::vector<double> v(e, 0.0);
  v[k] = scale;
  return v;
}

FieldPtr build_preset(const std::string& name, const PresetParams& p) {
  if (name == "zero") {
    return std::make_shared<RidgeFieldSet>(int_param(p, "d", 1), int_param(p, "e", 1),
                                           std::vector<RidgeTerm>{});
  }
  if (name == "constant") {
    const int d = int_param(p, "d", 1);
    const int e = int_param(p, "e", 1);
    const double a = param(p, "a", 1.0);
    std::vector<RidgeTerm> terms;
    for (int i = 0; i < d; ++i) {
      for (int c = 0; c < e; ++c) {
        const std::string key = "a_" + std::to_string(i + 1) + std::to_string(c + 1);
        terms.push_back(constant_term(i, c, param(p, key, a)));
      }
    }
    return std::make_shared<RidgeFieldSet>(d, e, std::move(terms));
  }
  if (name == "linear") {
    // V_i(y) = kappa_i * y
    const int d = int_param(p, "d", 1);
    const int e = int_param(p, "e", 1);
    const double kappa = param(p, "kappa", 1.0);
    std::vector<RidgeTerm> terms;
    for (int i = 0; i < d; ++i) {
      const double k = param(p, "kappa_" + std::to_string(i + 1), kappa);
      for (int c = 0; c < e; ++c) terms.push_back(linear_term(i, c, unit(e, c, k)));
    }
    return std::make_shared<RidgeFieldSet>(d, e, std::move(terms));
  }
  if (name == "sine") {
    // Scalar state: V_i(y) = amp * sin(freq * y + i * pi / 3) + shift.
    const int d = int_param(p, "d", 1);
    const double amp = param(p, "amp", 0.5);
    const double freq = param(p, "freq", 1.0);
    const double shift = param(p, "shift", 0.3);
    std::vector<RidgeTerm> terms;
    for (int i = 0; i < d; ++i) {
      terms.push_back(sine_term(i, 0, amp, {freq}, i * std::numbers::pi / 3.0));
      terms.push_back(constant_term(i, 0, shift));
    }
    return std::make_shared<RidgeFieldSet>(d, 1, std::move(terms));
  }
  if (name == "nonlinear2d") {
    // V_1 = (1 + amp cos y2, amp sin y1), V_2 = (amp sin y2, 1 + amp cos y1)
    const double amp = param(p, "amp", 0.5);
    const double half_pi = std::numbers::pi / 2.0;
    std::vector<RidgeTerm> terms{
        constant_term(0, 0, 1.0),
        sine_term(0, 0, amp, {0.0, 1.0}, half_pi),
        sine_term(0, 1, amp, {1.0, 0.0}, 0.0),
        sine_term(1, 0, amp, {0.0, 1.0}, 0.0),
        constant_term(1, 1, 1.0),
        sine_term(1, 1, amp, {1.0, 0.0}, half_pi),
    };
    return std::make_shared<RidgeFieldSet>(2, 2, std::move(terms));
  }
  if (name == "rotation") {
    // V_1 = omega * (-y2, y1), V_2 = (1, 0); [V_1, V_2] = (0, -omega).
    const double omega = param(p, "omega", 1.0);
    std::vector<RidgeTerm> terms{
        linear_term(0, 0, {0.0, -omega}),
        linear_term(0, 1, {omega, 0.0}),
        constant_term(1, 0, 1.0),
    };
    return std::make_shared<RidgeFieldSet>(2, 2, std::move(terms));
  }
  if (name == "commuting") {
    // Constant coordinate fields; every bracket vanishes.
    std::vector<RidgeTerm> terms{
        constant_term(0, 0, param(p, "a", 1.0)),
        constant_term(1, 1, param(p, "b", 1.0)),
    };
    return std::make_shared<RidgeFieldSet>(2, 2, std::move(terms));
  }
  throw Error(ErrorCode::config_error, "unknown vector field preset '" + name + "'");
}

}  // namespace

FieldPtr make_vector_fields(const std::string& name, const PresetParams& params) {
  FieldPtr v = build_preset(name, params);
  std::vector<std::vector<double>> probes;
  const int e = v->state_dim();
  for (int k = 0; k < 5; ++k) {
    std::vector<double> y(e);
    for (int c = 0; c < e; ++c) y[c] = -1.5 + 0.75 * ((k + 2 * c) % 5);
    probes.push_back(std::move(y));
  }
  const double err = derivative_check_error(*v, probes);
  if (err > 1e-5) {
    throw Error(ErrorCode::config_error,
                "preset '" + name + "' derivatives fail the finite-difference check (" +
                    std::to_string(err) + ")");
  }
  return v;
}

}  // namespace roughpde
