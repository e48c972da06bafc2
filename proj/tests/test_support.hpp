#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "roughpde/group_element.hpp"
#include "roughpde/rough_path.hpp"

namespace roughpde::testing {

inline std::vector<double> random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Product of a few segment signatures: group-like by construction.
inline GroupElement random_group(std::mt19937_64& rng, int dim, int step, double scale = 0.6) {
  GroupElement g = GroupElement::identity(dim, step);
  for (int s = 0; s < 3; ++s) {
    const auto delta = random_vector(rng, dim, scale);
    g = multiply(g, segment_signature(delta, step));
  }
  return g;
}

inline LieElement random_lie(std::mt19937_64& rng, int dim, int step, double scale = 0.6) {
  return log(random_group(rng, dim, step, scale));
}

// Piecewise-linear samples of f on a uniform grid of [0, horizon].
template <class F>
SampledPath sample_function(int dim, int segments, double horizon, F&& f) {
  SampledPath p;
  p.dim = dim;
  for (int i = 0; i <= segments; ++i) {
    const double t = horizon * i / segments;
    p.times.push_back(t);
    const std::vector<double> v = f(t);
    p.values.insert(p.values.end(), v.begin(), v.end());
  }
  return p;
}

inline SampledPath random_walk(std::mt19937_64& rng, int dim, int segments, double horizon = 1.0) {
  std::normal_distribution<double> n(0.0, std::sqrt(horizon / segments));
  SampledPath p;
  p.dim = dim;
  p.values.assign(dim, 0.0);
  p.times.push_back(0.0);
  for (int i = 1; i <= segments; ++i) {
    p.times.push_back(horizon * i / segments);
    for (int a = 0; a < dim; ++a) p.values.push_back(p.values[(i - 1) * dim + a] + n(rng));
  }
  return p;
}

inline std::vector<double> uniform_times(int segments, double horizon = 1.0) {
  std::vector<double> t(segments + 1);
  for (int i = 0; i <= segments; ++i) t[i] = horizon * i / segments;
  return t;
}

}  // namespace roughpde::testing
