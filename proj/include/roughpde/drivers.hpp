#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roughpde/rough_path.hpp"

namespace roughpde {

enum class DriverKind { brownian, fbm, ou, bridge, mcshane, cameron_martin };

DriverKind parse_driver_kind(const std::string& name);
std::string to_string(DriverKind kind);

struct DriverSpec {
  DriverKind kind = DriverKind::brownian;
  int dim = 1;
  double horizon = 1.0;
  int grid_size = 64;         // output segments M
  std::uint64_t seed = 0;
  int refinement = 64;        // fine segments per output segment
  double hurst = 0.5;         // fbm
  double ou_theta = 1.0;      // ou mean reversion
  double ou_sigma = 1.0;      // ou volatility
  double mcshane_c = 0.0;     // area drift constant
  double noise_scale = 1.0;   // eps; samples are scaled by sqrt(eps)
  // Cameron-Martin path: knots (times, row-major values); when empty the path
  // is h_t = velocity * t.
  std::vector<double> cm_knot_times;
  std::vector<double> cm_knot_values;
  std::vector<double> cm_velocity;

  void validate() const;
  std::vector<double> output_times() const;
};

// Seed of trajectory `index` within an ensemble: splitmix64(seed xor index).
std::uint64_t trajectory_seed(std::uint64_t seed, std::uint64_t index);
std::mt19937_64 make_engine(std::uint64_t seed);

// Lift parameters for Gaussian drivers: step 2 (p in (2 rho, 3)) when H > 1/3,
// step 3 (p in (2 rho, 4)) otherwise, rho = 1 / (2H).
int gaussian_lift_step(double hurst);
double gaussian_lift_p(double hurst);

// Fine-grid R^d samples (M * refinement segments) before lifting.
SampledPath sample_brownian_path(const DriverSpec& spec);
SampledPath sample_ou_path(const DriverSpec& spec);
SampledPath sample_bridge_path(const DriverSpec& spec);

RoughPathGrid sample_brownian_lift(const DriverSpec& spec);
RoughPathGrid sample_ou_lift(const DriverSpec& spec);
RoughPathGrid sample_bridge_lift(const DriverSpec& spec);
RoughPathGrid sample_fbm_lift(const DriverSpec& spec);
RoughPathGrid sample_mcshane_lift(const DriverSpec& spec);

// Adds the area drift Gamma * t, Gamma = ((0, c), (-c, 0)), to every point of
// a d = 2 lift.
RoughPathGrid add_area_drift(const RoughPathGrid& x, double c);

// Time-space lift (t, B) of a fine sample, stored on every `stride`-th point.
RoughPathGrid time_space_lift(const SampledPath& path, int step, double p, std::size_t stride);

// Exact-covariance fBm sampler; the covariance factor is computed once.
class FbmSampler {
 public:
  explicit FbmSampler(const DriverSpec& spec);

  int fine_segments() const noexcept { return fine_; }
  SampledPath sample_path(std::uint64_t seed) const;
  RoughPathGrid sample_lift(std::uint64_t seed) const;

 private:
  DriverSpec spec_;
  int fine_;
  int stride_;
  Eigen::MatrixXd factor_;
};

CameronMartinPath make_cameron_martin(const DriverSpec& spec);
RoughPathGrid lift_cameron_martin(const CameronMartinPath& h, std::span<const double> times,
                                  int step, double p = 0.0);
double action(const CameronMartinPath& h);

// Dispatches on spec.kind.
RoughPathGrid sample_lift(const DriverSpec& spec);

}  // namespace roughpde
