// Serial reference against the OpenMP kernels on the data-parallel hot spots.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "roughpde/drivers.hpp"
#include "roughpde/execution.hpp"
#include "roughpde/parabolic.hpp"
#include "roughpde/rough_path.hpp"
#include "roughpde/transport.hpp"

using namespace roughpde;

namespace {

double seconds(const std::function<double()>& body, double& checksum) {
  const auto start = std::chrono::steady_clock::now();
  checksum = body();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(const std::string& name, const std::function<double(Execution)>& kernel) {
  double serial_sum = 0.0;
  double parallel_sum = 0.0;
  const double ts = seconds([&] { return kernel(Execution::serial); }, serial_sum);
  const double tp = seconds([&] { return kernel(Execution::parallel); }, parallel_sum);
  std::printf("%-24s serial %8.3f s  parallel %8.3f s  speedup %5.2f  %s\n", name.c_str(), ts, tp,
              ts / tp, serial_sum == parallel_sum ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads: %d\n", max_threads());
  DriverSpec spec;
  spec.dim = 2;
  spec.grid_size = 512;
  spec.refinement = 8;
  spec.seed = 11;
  const RoughPathGrid x = sample_brownian_lift(spec);
  const auto fields = make_vector_fields("nonlinear2d");
  const auto phi = make_initial_datum("gaussian", 2);
  const SpaceGrid grid = SpaceGrid::uniform(2, -2.0, 2.0, 0.1);
  const std::vector<double> outs = {x.times()[256], x.horizon()};

  report("holder_norm", [&](Execution exec) { return holder_norm(x, exec); });

  report("transport_grid", [&](Execution exec) {
    const auto u = solve_transport(*fields, phi, x, outs, grid, {}, exec);
    double s = 0.0;
    for (double v : u.values) s += v;
    return s;
  });

  const auto coeffs = make_coefficients("variable", 2);
  report("coefficient_assembly", [&](Execution exec) {
    const auto tc = transform_coefficients(coeffs, *fields, x, grid, outs, {}, exec);
    double s = 0.0;
    for (double v : tc.a) s += v;
    return s;
  });

  report("inverse_flow_batch", [&](Execution exec) {
    const auto z = inverse_flow_batch(*fields, grid.points(), x, x.horizon(), {}, exec);
    double s = 0.0;
    for (double v : z) s += v;
    return s;
  });
  return 0;
}
