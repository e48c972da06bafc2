#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "roughpde/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Rough PDE experiments"};
  std::string experiment;
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  app.add_option("experiment", experiment, "Experiment to run")
      ->required()
      ->check(CLI::IsMember(roughpde::kExperiments));
  app.add_option("--config", config, "Config file (section.key = value)")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Overrides driver.seed");
  app.add_option("--out", out, "Output directory");
  CLI11_PARSE(app, argc, argv);

  try {
    roughpde::Config cfg = roughpde::Config::load(config);
    if (*seed_opt) cfg.set("driver.seed", std::to_string(seed));
    const auto result = roughpde::run_experiment(experiment, cfg);
    roughpde::write_outputs(result, out);
    for (const auto& v : result.verdicts) {
      std::cout << (v.pass ? "PASS " : "FAIL ") << v.id << "  (" << v.detail << ")\n";
    }
    return result.all_pass() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
