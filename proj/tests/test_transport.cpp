#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "roughpde/drivers.hpp"
#include "roughpde/error.hpp"
#include "roughpde/transport.hpp"
#include "test_support.hpp"

using namespace roughpde;
using roughpde::testing::sample_function;

namespace {

RoughPathGrid smooth_driver(int segments) {
  return lift_piecewise_linear(sample_function(1, segments, 1.0, [](double t) {
    return std::vector<double>{std::sin(2.0 * t) + 0.5 * t};
  }), 2);
}

RoughPathGrid brownian(int grid, std::uint64_t seed) {
  DriverSpec s;
  s.dim = 2;
  s.grid_size = grid;
  s.refinement = 8;
  s.seed = seed;
  return sample_lift(s);
}

const std::vector<double> kOutputs = {0.25, 0.5, 1.0};

}  // namespace

TEST(Transport, DatumPresets) {
  for (const char* name : {"gaussian", "tanh", "constant", "sine", "quadratic"}) {
    const auto phi = make_initial_datum(name, 2);
    EXPECT_LT(gradient_check_error(phi, {{0.1, -0.4}, {1.0, 2.0}}), 1e-5) << name;
  }
  EXPECT_FALSE(make_initial_datum("quadratic", 1).bounded());
  EXPECT_EQ(make_initial_datum("tanh", 1).lower, -1.0);
  EXPECT_THROW(make_initial_datum("cubic", 1), Error);
}

TEST(Transport, IdentityDriverKeepsDatum) {
  const auto v = make_vector_fields("sine", {{"d", 2}});
  const auto t = roughpde::testing::uniform_times(8);
  const RoughPathGrid x(t, std::vector<GroupElement>(t.size(), GroupElement::identity(2, 2)), 2.5);
  const auto phi = make_initial_datum("gaussian", 1);
  const auto grid = SpaceGrid::uniform(1, -2, 2, 0.1);
  const auto u = solve_transport(*v, phi, x, kOutputs, grid);
  const auto pts = grid.points();
  for (std::size_t i = 0; i < kOutputs.size(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      EXPECT_DOUBLE_EQ(u.at_time(i)[j], phi.value(std::span<const double>(pts).subspan(j, 1)));
    }
  }
}

TEST(Transport, ConstantFieldCharacteristics) {
  const double a = 0.7;
  const auto v = make_vector_fields("constant", {{"a", a}});
  const auto x = smooth_driver(256);
  const auto phi = make_initial_datum("tanh", 1);
  const auto grid = SpaceGrid::uniform(1, -3, 3, 0.05);
  const auto u = solve_transport(*v, phi, x, kOutputs, grid);
  double err = 0.0;
  for (std::size_t i = 0; i < kOutputs.size(); ++i) {
    const double xt = x.point(x.index_of(kOutputs[i]))(0);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      err = std::max(err, std::abs(u.at_time(i)[j] - std::tanh(grid.coordinate(0, j) - a * xt)));
    }
  }
  EXPECT_LT(err, 1e-8);
}

TEST(Transport, LinearFieldCharacteristics) {
  const auto v = make_vector_fields("linear");
  const auto x = smooth_driver(1024);
  const auto phi = make_initial_datum("gaussian", 1);
  const auto grid = SpaceGrid::uniform(1, -2, 2, 0.05);
  const auto u = solve_transport(*v, phi, x, kOutputs, grid);
  double err = 0.0;
  for (std::size_t i = 0; i < kOutputs.size(); ++i) {
    const double xt = x.point(x.index_of(kOutputs[i]))(0);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double z = grid.coordinate(0, j) * std::exp(-xt);
      err = std::max(err, std::abs(u.at_time(i)[j] - phi.value(std::span<const double>(&z, 1))));
    }
  }
  EXPECT_LT(err, 1e-5);
}

TEST(Transport, RangeIsPreserved) {
  const auto v = make_vector_fields("nonlinear2d");
  const auto x = brownian(64, 1);
  const auto phi = make_initial_datum("tanh", 2);
  const auto grid = SpaceGrid::uniform(2, -2, 2, 0.25);
  const auto u = solve_transport(*v, phi, x, kOutputs, grid);
  for (double val : u.values) {
    EXPECT_GE(val, phi.lower);
    EXPECT_LE(val, phi.upper);
  }
}

TEST(Transport, ParallelMatchesSerial) {
  const auto v = make_vector_fields("nonlinear2d");
  const auto x = brownian(32, 2);
  const auto phi = make_initial_datum("gaussian", 2);
  const auto grid = SpaceGrid::uniform(2, -1, 1, 0.25);
  const auto a = solve_transport(*v, phi, x, kOutputs, grid, {}, Execution::serial);
  const auto b = solve_transport(*v, phi, x, kOutputs, grid, {}, Execution::parallel);
  EXPECT_EQ(a.values, b.values);
}

TEST(Transport, SolutionMapContinuity) {
  const auto v = make_vector_fields("sine", {{"d", 2}});
  const auto x = brownian(64, 3);
  const auto phi = make_initial_datum("gaussian", 1);
  const auto grid = SpaceGrid::uniform(1, -2, 2, 0.1);
  EXPECT_EQ(solution_map_modulus(*v, phi, x, x, kOutputs, grid), 0.0);
  double previous = 2.0;
  for (double delta : {0.1, 0.01, 0.001}) {
    const double m = solution_map_modulus(*v, phi, x, dilate_path(1.0 + delta, x), kOutputs, grid);
    EXPECT_LT(m, previous);
    EXPECT_LE(m, 2.0 * phi.upper);
    previous = m;
  }
}

TEST(Transport, GradientMatchesJet) {
  const auto v = make_vector_fields("nonlinear2d");
  const auto x = brownian(64, 4);
  const auto phi = make_initial_datum("gaussian", 2);
  const double t = 0.5;
  const double h = 1e-4;
  const std::vector<double> y = {0.3, -0.2};
  const auto jet = solve_rde_jet(*v, y, time_reverse(x, t)).back();
  std::vector<double> grad(2);
  phi.gradient(jet.point, grad);
  for (int k = 0; k < 2; ++k) {
    auto yp = y, ym = y;
    yp[k] += h;
    ym[k] -= h;
    const double fd = (phi.value(inverse_flow(*v, yp, x, t)) - phi.value(inverse_flow(*v, ym, x, t))) / (2 * h);
    const double exact = grad[0] * jet.jac(0, k) + grad[1] * jet.jac(1, k);
    EXPECT_NEAR(fd, exact, 1e-4 * std::max(1.0, std::abs(exact)));
  }
}

TEST(Transport, ValueAlongCharacteristicIsDatum) {
  const auto v = make_vector_fields("nonlinear2d");
  const auto x = brownian(128, 5);
  const auto phi = make_initial_datum("gaussian", 2);
  RdeOptions opt;
  opt.substeps = 64;
  const std::vector<double> y0 = {0.5, 0.1};
  const auto traj = solve_rde(*v, y0, x, opt);
  const auto fwd = traj.back();
  EXPECT_NEAR(phi.value(inverse_flow(*v, fwd, x, 1.0, opt)), phi.value(y0), 1e-4);
}

TEST(Transport, ScalarFieldCsv) {
  ScalarField f;
  f.space = SpaceGrid::uniform(2, 0, 1, 0.5);
  f.times = {0.0};
  f.values.assign(f.space.size(), 0.25);
  std::ostringstream out;
  write_scalar_field_csv(out, f);
  const auto text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,y_1,y_2,u");
  EXPECT_NE(text.find("\n0,0,0.5,0.25\n"), std::string::npos);
}
