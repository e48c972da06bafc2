#include "roughpde/drivers.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "roughpde/error.hpp"

namespace roughpde {

namespace {

constexpr int kMaxFbmPoints = 4096;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> uniform_times(double horizon, int segments) {
  std::vector<double> t(segments + 1);
  for (int i = 0; i <= segments; ++i) t[i] = horizon * i / segments;
  t.back() = horizon;
  return t;
}

void scale_values(SampledPath& path, double noise_scale) {
  if (noise_scale == 1.0) return;
  const double s = std::sqrt(noise_scale);
  for (double& v : path.values) v *= s;
}

void require_kind(const DriverSpec& spec, DriverKind kind) {
  if (spec.kind != kind) {
    throw Error(ErrorCode::invalid_argument,
                "driver kind is " + to_string(spec.kind) + ", expected " + to_string(kind));
  }
}

// Fine Brownian path with unit variance per unit time, unscaled.
SampledPath raw_brownian(const DriverSpec& spec) {
  const int n = spec.grid_size * spec.refinement;
  SampledPath path;
  path.dim = spec.dim;
  path.times = uniform_times(spec.horizon, n);
  path.values.assign(static_cast<std::size_t>(n + 1) * spec.dim, 0.0);
  auto engine = make_engine(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 1; i <= n; ++i) {
    const double sd = std::sqrt(path.times[i] - path.times[i - 1]);
    for (int k = 0; k < spec.dim; ++k) {
      path.at(i)[k] = path.at(i - 1)[k] + sd * normal(engine);
    }
  }
  return path;
}

}  // namespace

DriverKind parse_driver_kind(const std::string& name) {
  if (name == "brownian") return DriverKind::brownian;
  if (name == "fbm") return DriverKind::fbm;
  if (name == "ou") return DriverKind::ou;
  if (name == "bridge") return DriverKind::bridge;
  if (name == "mcshane") return DriverKind::mcshane;
  if (name == "cameron_martin") return DriverKind::cameron_martin;
  throw Error(ErrorCode::config_error, "unknown driver kind '" + name + "'");
}

std::string to_string(DriverKind kind) {
  switch (kind) {
    case DriverKind::brownian: return "brownian";
    case DriverKind::fbm: return "fbm";
    case DriverKind::ou: return "ou";
    case DriverKind::bridge: return "bridge";
    case DriverKind::mcshane: return "mcshane";
    case DriverKind::cameron_martin: return "cameron_martin";
  }
  return "unknown";
}

void DriverSpec::validate() const {
  if (dim < 1) throw Error(ErrorCode::invalid_argument, "driver dimension must be >= 1");
  if (grid_size < 2) throw Error(ErrorCode::invalid_argument, "grid size M must be >= 2");
  if (!(horizon > 0.0)) throw Error(ErrorCode::invalid_argument, "horizon T must be positive");
  if (refinement < 1) throw Error(ErrorCode::invalid_argument, "refinement must be >= 1");
  if (!(noise_scale >= 0.0)) throw Error(ErrorCode::invalid_argument, "noise scale must be >= 0");
  if (kind == DriverKind::fbm && !(hurst > 0.25 && hurst < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "Hurst parameter must lie in (1/4, 1)");
  }
  if (kind == DriverKind::ou && !(ou_theta >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "OU mean reversion must be >= 0");
  }
  if (kind == DriverKind::mcshane && dim != 2) {
    throw Error(ErrorCode::dimension_mismatch, "McShane drivers require d = 2");
  }
}

std::vector<double> DriverSpec::output_times() const { return uniform_times(horizon, grid_size); }

std::uint64_t trajectory_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ index);
}

std::mt19937_64 make_engine(std::uint64_t seed) { return std::mt19937_64(splitmix64(seed)); }

int gaussian_lift_step(double hurst) { return hurst > 1.0 / 3.0 ? 2 : 3; }

double gaussian_lift_p(double hurst) {
  const double two_rho = 1.0 / hurst;
  if (gaussian_lift_step(hurst) == 2) return (std::max(two_rho, 2.0) + 3.0) / 2.0;
  return (two_rho + 4.0) / 2.0;
}

SampledPath sample_brownian_path(const DriverSpec& spec) {
  spec.validate();
  SampledPath path = raw_brownian(spec);
  scale_values(path, spec.noise_scale);
  return path;
}

SampledPath sample_ou_path(const DriverSpec& spec) {
  spec.validate();
  const int n = spec.grid_size * spec.refinement;
  SampledPath path;
  path.dim = spec.dim;
  path.times = uniform_times(spec.horizon, n);
  path.values.assign(static_cast<std::size_t>(n + 1) * spec.dim, 0.0);
  auto engine = make_engine(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double theta = spec.ou_theta;
  const double sigma = spec.ou_sigma;
  for (int i = 1; i <= n; ++i) {
    const double dt = path.times[i] - path.times[i - 1];
    // Exact transition: X' = X e^{-theta dt} + sigma sqrt((1 - e^{-2 theta dt}) / (2 theta)) Z.
    const double decay = std::exp(-theta * dt);
    const double var = theta > 0.0 ? -std::expm1(-2.0 * theta * dt) / (2.0 * theta) : dt;
    const double sd = sigma * std::sqrt(var);
    for (int k = 0; k < spec.dim; ++k) {
      const double prev = path.at(i - 1)[k];
      path.at(i)[k] = (theta > 0.0 ? prev * decay : prev) + sd * normal(engine);
    }
  }
  scale_values(path, spec.noise_scale);
  return path;
}

SampledPath sample_bridge_path(const DriverSpec& spec) {
  spec.validate();
  SampledPath path = raw_brownian(spec);
  const std::size_t n = path.size() - 1;
  const std::vector<double> end(path.at(n).begin(), path.at(n).end());
  for (std::size_t i = 1; i < n; ++i) {
    const double frac = path.times[i] / spec.horizon;
    for (int k = 0; k < spec.dim; ++k) path.at(i)[k] -= frac * end[k];
  }
  for (int k = 0; k < spec.dim; ++k) path.at(n)[k] = 0.0;
  scale_values(path, spec.noise_scale);
  return path;
}

RoughPathGrid sample_brownian_lift(const DriverSpec& spec) {
  require_kind(spec, DriverKind::brownian);
  return lift_piecewise_linear(sample_brownian_path(spec), 2, gaussian_lift_p(0.5),
                               spec.refinement);
}

RoughPathGrid sample_ou_lift(const DriverSpec& spec) {
  require_kind(spec, DriverKind::ou);
  return lift_piecewise_linear(sample_ou_path(spec), 2, gaussian_lift_p(0.5), spec.refinement);
}

RoughPathGrid sample_bridge_lift(const DriverSpec& spec) {
  require_kind(spec, DriverKind::bridge);
  return lift_piecewise_linear(sample_bridge_path(spec), 2, gaussian_lift_p(0.5),
                               spec.refinement);
}

RoughPathGrid add_area_drift(const RoughPathGrid& x, double c) {
  if (x.dim() != 2) throw Error(ErrorCode::dimension_mismatch, "area drift requires d = 2");
  if (x.step() < 2) throw Error(ErrorCode::step_mismatch, "area drift requires step >= 2");
  if (c == 0.0) return x;
  // Gamma t is central at step 2, so exp(log x_t + Gamma t) = x_t exp(Gamma t).
  std::vector<GroupElement> points;
  points.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    GroupElement drift = GroupElement::identity(2, x.step());
    drift(0, 1) = c * x.times()[i];
    drift(1, 0) = -c * x.times()[i];
    points.push_back(multiply(x.point(i), drift));
  }
  return RoughPathGrid(x.times(), std::move(points), x.p());
}

RoughPathGrid sample_mcshane_lift(const DriverSpec& spec) {
  require_kind(spec, DriverKind::mcshane);
  spec.validate();
  const RoughPathGrid base =
      lift_piecewise_linear(sample_brownian_path(spec), 2, gaussian_lift_p(0.5), spec.refinement);
  return add_area_drift(base, spec.mcshane_c);
}

RoughPathGrid time_space_lift(const SampledPath& path, int step, double p, std::size_t stride) {
  SampledPath augmented;
  augmented.dim = path.dim + 1;
  augmented.times = path.times;
  augmented.values.reserve(path.size() * augmented.dim);
  for (std::size_t i = 0; i < path.size(); ++i) {
    augmented.values.push_back(path.times[i]);
    auto v = path.at(i);
    augmented.values.insert(augmented.values.end(), v.begin(), v.end());
  }
  return lift_piecewise_linear(augmented, step, p, stride);
}

FbmSampler::FbmSampler(const DriverSpec& spec) : spec_(spec) {
  require_kind(spec, DriverKind::fbm);
  spec.validate();
  if (spec.grid_size > kMaxFbmPoints) {
    throw Error(ErrorCode::invalid_argument, "fBm grid larger than the dense-covariance limit");
  }
  stride_ = std::max(1, std::min(spec.refinement, kMaxFbmPoints / spec.grid_size));
  fine_ = spec.grid_size * stride_;
  const auto t = uniform_times(spec.horizon, fine_);
  const double two_h = 2.0 * spec.hurst;
  Eigen::MatrixXd cov(fine_, fine_);
  for (int i = 0; i < fine_; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double s = t[i + 1];
      const double u = t[j + 1];
      const double r = 0.5 * (std::pow(s, two_h) + std::pow(u, two_h) - std::pow(s - u, two_h));
      cov(i, j) = r;
      cov(j, i) = r;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::factorization_failed, "fBm covariance is not numerically positive definite");
  }
  factor_ = llt.matrixL();
}

SampledPath FbmSampler::sample_path(std::uint64_t seed) const {
  SampledPath path;
  path.dim = spec_.dim;
  path.times = uniform_times(spec_.horizon, fine_);
  path.values.assign(static_cast<std::size_t>(fine_ + 1) * spec_.dim, 0.0);
  auto engine = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(fine_);
  for (int k = 0; k < spec_.dim; ++k) {
    for (int i = 0; i < fine_; ++i) z(i) = normal(engine);
    const Eigen::VectorXd x = factor_.triangularView<Eigen::Lower>() * z;
    for (int i = 0; i < fine_; ++i) path.at(i + 1)[k] = x(i);
  }
  scale_values(path, spec_.noise_scale);
  return path;
}

RoughPathGrid FbmSampler::sample_lift(std::uint64_t seed) const {
  return lift_piecewise_linear(sample_path(seed), gaussian_lift_step(spec_.hurst),
                               gaussian_lift_p(spec_.hurst), stride_);
}

RoughPathGrid sample_fbm_lift(const DriverSpec& spec) { return FbmSampler(spec).sample_lift(spec.seed); }

CameronMartinPath make_cameron_martin(const DriverSpec& spec) {
  SampledPath knots;
  knots.dim = spec.dim;
  if (!spec.cm_knot_times.empty()) {
    knots.times = spec.cm_knot_times;
    knots.values = spec.cm_knot_values;
  } else {
    std::vector<double> v = spec.cm_velocity;
    v.resize(spec.dim, 0.0);
    knots.times = {0.0, spec.horizon};
    knots.values.assign(spec.dim, 0.0);
    for (int k = 0; k < spec.dim; ++k) knots.values.push_back(v[k] * spec.horizon);
  }
  return CameronMartinPath(std::move(knots));
}

RoughPathGrid lift_cameron_martin(const CameronMartinPath& h, std::span<const double> times,
                                  int step, double p) {
  // Lift on the union of grid times and knots so kinks inside a grid cell are
  // captured exactly, then keep the grid times only.
  std::set<double> merged(times.begin(), times.end());
  for (double t : h.knots().times) {
    if (t > times.front() && t < times.back()) merged.insert(t);
  }
  const std::vector<double> fine(merged.begin(), merged.end());
  const RoughPathGrid full = lift_piecewise_linear(h.sample(fine), step, p);
  std::vector<GroupElement> points;
  points.reserve(times.size());
  std::size_t j = 0;
  for (double t : times) {
    while (fine[j] != t) ++j;
    points.push_back(full.point(j));
  }
  return RoughPathGrid(std::vector<double>(times.begin(), times.end()), std::move(points), full.p());
}

double action(const CameronMartinPath& h) { return h.energy(); }

RoughPathGrid sample_lift(const DriverSpec& spec) {
  switch (spec.kind) {
    case DriverKind::brownian: return sample_brownian_lift(spec);
    case DriverKind::fbm: return sample_fbm_lift(spec);
    case DriverKind::ou: return sample_ou_lift(spec);
    case DriverKind::bridge: return sample_bridge_lift(spec);
    case DriverKind::mcshane: return sample_mcshane_lift(spec);
    case DriverKind::cameron_martin: {
      spec.validate();
      const auto times = spec.output_times();
      return lift_cameron_martin(make_cameron_martin(spec), times, 2, gaussian_lift_p(0.5));
    }
  }
  throw Error(ErrorCode::invalid_argument, "unknown driver kind");
}

}  // namespace roughpde
