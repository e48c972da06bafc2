#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "roughpde/drivers.hpp"
#include "roughpde/error.hpp"
#include "roughpde/rde.hpp"
#include "test_support.hpp"

using namespace roughpde;
using roughpde::testing::random_walk;
using roughpde::testing::sample_function;

namespace {

RoughPathGrid sine_driver(int segments, int step) {
  return lift_piecewise_linear(sample_function(1, segments, 1.0, [](double t) {
    return std::vector<double>{std::sin(t)};
  }), step);
}

RoughPathGrid brownian(int dim, int grid, std::uint64_t seed) {
  DriverSpec s;
  s.dim = dim;
  s.grid_size = grid;
  s.refinement = 8;
  s.seed = seed;
  return sample_lift(s);
}

double linear_error(int segments, int step) {
  const auto v = make_vector_fields("linear");
  const auto x = sine_driver(segments, step);
  const std::vector<double> y0 = {0.8};
  const auto traj = solve_rde(*v, y0, x);
  double err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    err = std::max(err, std::abs(traj.at(i)[0] - 0.8 * std::exp(x.point(i)(0))));
  }
  return err;
}

}  // namespace

TEST(Rde, ConstantFieldIsExact) {
  const auto v = make_vector_fields("constant", {{"a", -1.7}});
  std::mt19937_64 rng(1);
  const auto x = lift_piecewise_linear(random_walk(rng, 1, 100), 2);
  const std::vector<double> y0 = {0.25};
  const auto traj = solve_rde(*v, y0, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(traj.at(i)[0], 0.25 - 1.7 * x.point(i)(0), 1e-12);
  }
}

TEST(Rde, LinearFieldConvergesAtSchemeOrder) {
  for (int step = 1; step <= 3; ++step) {
    const double coarse = linear_error(128, step);
    const double fine = linear_error(256, step);
    EXPECT_NEAR(coarse / fine, std::pow(2.0, step), 0.2 * std::pow(2.0, step)) << step;
  }
  EXPECT_LT(linear_error(1024, 2), 1e-6);
}

TEST(Rde, CommutingFieldsSeeOnlyLevelOne) {
  const auto v = make_vector_fields("commuting", {{"a", 2.0}, {"b", -1.0}});
  const auto x = brownian(2, 32, 3);
  const std::vector<double> y0 = {0.1, 0.2};
  const auto traj = solve_rde(*v, y0, x);
  const auto end = traj.back();
  EXPECT_NEAR(end[0], 0.1 + 2.0 * x.points().back()(0), 1e-12);
  EXPECT_NEAR(end[1], 0.2 - 1.0 * x.points().back()(1), 1e-12);
}

TEST(Rde, RotationPicksUpArea) {
  // V_1 = (-y2, y1), V_2 = (1, 0) over a closed loop: only the area term moves y.
  const auto v = make_vector_fields("rotation");
  SampledPath loop;
  loop.dim = 2;
  loop.times = {0.0, 0.25, 0.5, 0.75, 1.0};
  const double h = 1e-3;
  loop.values = {0, 0, h, 0, h, h, 0, h, 0, 0};
  const auto x = lift_piecewise_linear(loop, 2);
  const std::vector<double> y0 = {0.0, 0.0};
  const auto traj = solve_rde(*v, y0, x);
  const auto end = traj.back();
  // [V_1, V_2] = (0, -1), area h^2.
  EXPECT_NEAR(end[0], 0.0, 1e-8);
  EXPECT_NEAR(end[1], -h * h, 1e-8);
}

TEST(Rde, JetMatchesFiniteDifferences) {
  const auto v = make_vector_fields("nonlinear2d");
  const auto x = brownian(2, 64, 4);
  const std::vector<double> y0 = {0.3, -0.6};
  const auto jets = solve_rde_jet(*v, y0, x);
  const auto& jet = jets.back();
  const auto base = solve_rde(*v, y0, x);
  for (int a = 0; a < 2; ++a) EXPECT_NEAR(jet.point[a], base.back()[a], 1e-13);

  const double h = 1e-4;
  for (int k = 0; k < 2; ++k) {
    auto yp = y0, ym = y0;
    yp[k] += h;
    ym[k] -= h;
    const auto jp = solve_rde_jet(*v, yp, x).back();
    const auto jm = solve_rde_jet(*v, ym, x).back();
    for (int a = 0; a < 2; ++a) {
      EXPECT_NEAR(jet.jac(a, k), (jp.point[a] - jm.point[a]) / (2 * h), 1e-6);
      for (int l = 0; l < 2; ++l) {
        EXPECT_NEAR(jet.hess(a, l, k), (jp.jac(a, l) - jm.jac(a, l)) / (2 * h), 1e-6);
      }
    }
  }
  EXPECT_GE(jet.condition_number(), 1.0);
}

TEST(Rde, InverseFlowUndoesForwardFlow) {
  const auto v = make_vector_fields("nonlinear2d");
  const auto x = brownian(2, 128, 5);
  RdeOptions opt;
  opt.substeps = 64;
  const std::vector<double> y0 = {0.4, 1.1};
  const auto forward = solve_rde(*v, y0, x, opt);
  for (std::size_t i : {32u, 128u}) {
    const auto fwd = forward.at(i);
    const auto back = inverse_flow(*v, fwd, x, x.times()[i], opt);
    EXPECT_NEAR(back[0], y0[0], 1e-4);
    EXPECT_NEAR(back[1], y0[1], 1e-4);
  }
}

TEST(Rde, InverseFlowOfLinearFieldIsExactExponential) {
  const auto v = make_vector_fields("linear");
  const auto x = sine_driver(512, 3);
  const std::vector<double> y = {1.3};
  const auto z = inverse_flow(*v, y, x, 1.0);
  EXPECT_NEAR(z[0], 1.3 * std::exp(-x.points().back()(0)), 1e-8);
}

TEST(Rde, BatchMatchesSingleAndSerial) {
  const auto v = make_vector_fields("nonlinear2d");
  const auto x = brownian(2, 32, 6);
  const std::vector<double> pts = {0.0, 0.0, 1.0, -1.0, 0.5, 2.0};
  const auto par = inverse_flow_batch(*v, pts, x, 0.5, {}, Execution::parallel);
  const auto ser = inverse_flow_batch(*v, pts, x, 0.5, {}, Execution::serial);
  EXPECT_EQ(par, ser);
  const auto one = inverse_flow(*v, std::span<const double>(pts).subspan(2, 2), x, 0.5);
  EXPECT_EQ(one[0], par[2]);
  EXPECT_EQ(one[1], par[3]);
}

TEST(Rde, SubstepsAndSchemeStepValidation) {
  const auto v = make_vector_fields("linear");
  const auto x = sine_driver(8, 2);
  const std::vector<double> y0 = {1.0};
  RdeOptions opt;
  opt.substeps = 0;
  EXPECT_THROW(solve_rde(*v, y0, x, opt), Error);
  opt.substeps = 1;
  opt.scheme_step = 1;
  EXPECT_THROW(solve_rde(*v, y0, x, opt), Error);
  opt.scheme_step = 3;
  EXPECT_NO_THROW(solve_rde(*v, y0, x, opt));
}

TEST(Rde, DimensionMismatch) {
  const auto v = make_vector_fields("nonlinear2d");
  const auto x = sine_driver(8, 2);
  const std::vector<double> y0 = {1.0, 0.0};
  try {
    solve_rde(*v, y0, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
  }
}

TEST(Rde, BlowUpIsReported) {
  const auto v = make_vector_fields("linear", {{"kappa", 40.0}});
  const auto x = lift_piecewise_linear(sample_function(1, 16, 1.0, [](double t) {
    return std::vector<double>{t};
  }), 2);
  const std::vector<double> y0 = {1.0};
  RdeOptions opt;
  opt.blow_up_threshold = 1e6;
  try {
    solve_rde(*v, y0, x, opt);
    FAIL();
  } catch (const BlowUpError& e) {
    EXPECT_EQ(e.code(), ErrorCode::blow_up);
    EXPECT_GT(e.time(), 0.0);
  }
}
