#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "roughpde/error.hpp"
#include "roughpde/vector_fields.hpp"
#include "test_support.hpp"

using namespace roughpde;

namespace {

std::vector<std::vector<double>> probes(int e, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> out;
  for (int i = 0; i < n; ++i) out.push_back(roughpde::testing::random_vector(rng, e, 2.0));
  return out;
}

}  // namespace

TEST(VectorFields, PresetDerivativesMatchDifferences) {
  const std::vector<std::pair<std::string, PresetParams>> presets = {
      {"zero", {}},           {"constant", {{"d", 2}, {"e", 2}}},
      {"linear", {{"e", 2}}}, {"sine", {{"d", 2}}},
      {"nonlinear2d", {}},    {"rotation", {{"omega", 0.7}}},
      {"commuting", {}}};
  for (const auto& [name, params] : presets) {
    const auto v = make_vector_fields(name, params);
    EXPECT_LT(derivative_check_error(*v, probes(v->state_dim(), 20, 1)), 1e-5) << name;
  }
}

TEST(VectorFields, UnknownPreset) {
  try {
    make_vector_fields("spiral");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config_error);
  }
}

TEST(VectorFields, SineValues) {
  const auto v = make_vector_fields("sine", {{"d", 2}, {"amp", 0.5}, {"shift", 0.3}});
  FieldDerivatives f;
  const double y[] = {0.4};
  v->evaluate(y, 1, f);
  EXPECT_NEAR(f.value(0, 0), 0.5 * std::sin(0.4) + 0.3, 1e-15);
  EXPECT_NEAR(f.value(1, 0), 0.5 * std::sin(0.4 + std::numbers::pi / 3) + 0.3, 1e-15);
  EXPECT_NEAR(f.d1(0, 0, 0), 0.5 * std::cos(0.4), 1e-15);
}

TEST(VectorFields, Brackets) {
  const auto rot = make_vector_fields("rotation", {{"omega", 2.0}});
  const double y[] = {0.3, -1.1};
  const auto b = lie_bracket(*rot, 0, 1, y);
  EXPECT_NEAR(b[0], 0.0, 1e-15);
  EXPECT_NEAR(b[1], -2.0, 1e-15);
  const auto c = make_vector_fields("commuting");
  const auto z = lie_bracket(*c, 0, 1, y);
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(z[1], 0.0);
}

TEST(VectorFields, BracketDriftSet) {
  const auto rot = make_vector_fields("rotation");
  const BracketDriftFieldSet drift(rot, 0.5);
  EXPECT_EQ(drift.fields(), 3);
  FieldDerivatives f;
  const double y[] = {0.2, 0.9};
  drift.evaluate(y, 0, f);
  EXPECT_NEAR(f.value(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(f.value(0, 1), -0.5, 1e-15);
  EXPECT_NEAR(f.value(1, 0), -0.9, 1e-15);
  EXPECT_NEAR(f.value(2, 0), 1.0, 1e-15);
  EXPECT_LT(derivative_check_error(drift, probes(2, 10, 2)), 1e-5);
}
