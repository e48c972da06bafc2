#include "roughpde/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "parallel.hpp"
#include "roughpde/drivers.hpp"
#include "roughpde/error.hpp"

namespace roughpde {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::config_error, "config key '" + key + "' is not a number: " + text);
}

}  // namespace

Config Config::parse(std::istream& in) {
  Config cfg;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::config_error, "line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty() || key.find('.') == std::string::npos) {
      throw Error(ErrorCode::config_error,
                  "line " + std::to_string(number) + ": keys must look like section.key");
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open config " + path.string());
  return parse(in);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(key, it->second);
}

int Config::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const double v = to_double(key, it->second);
  if (v != std::floor(v)) throw Error(ErrorCode::config_error, "config key '" + key + "' must be an integer");
  return static_cast<int>(v);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used == it->second.size() && it->second.find('-') == std::string::npos) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::config_error, "config key '" + key + "' must be an unsigned integer");
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trim(item).empty()) out.push_back(to_double(key, trim(item)));
  }
  return out;
}

std::map<std::string, double> Config::section_params(const std::string& section) const {
  std::map<std::string, double> out;
  const std::string prefix = section + ".";
  for (const auto& [key, value] : values_) {
    if (key.rfind(prefix, 0) != 0) continue;
    const std::string name = key.substr(prefix.size());
    if (name == "preset") continue;
    out[name] = to_double(key, value);
  }
  return out;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_table_csv(std::ostream& out, const Table& table) {
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

bool ExperimentResult::all_pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

namespace {

struct Setup {
  FieldPtr fields;
  EllipticCoefficients coeffs;
  InitialDatum phi;
  DriverSpec driver;
  SpaceGrid evaluation;
  SpaceGrid box;
  int output_count = 4;
  RdeOptions rde;
  ParabolicOptions pde;
};

Setup make_setup(const Config& cfg, const std::string& default_fields) {
  Setup s;
  s.fields = make_vector_fields(cfg.get_string("fields.preset", default_fields), cfg.section_params("fields"));
  const int e = s.fields->state_dim();
  s.coeffs = make_coefficients(cfg.get_string("coefficients.preset", "heat"), e,
                               cfg.section_params("coefficients"));
  s.phi = make_initial_datum(cfg.get_string("datum.preset", "gaussian"), e, cfg.section_params("datum"));

  DriverSpec& d = s.driver;
  d.kind = parse_driver_kind(cfg.get_string("driver.kind", "brownian"));
  d.dim = cfg.get_int("driver.dim", s.fields->fields());
  d.horizon = cfg.get_double("driver.horizon", 1.0);
  d.grid_size = cfg.get_int("driver.grid_size", 256);
  d.seed = cfg.get_u64("driver.seed", 0);
  d.refinement = cfg.get_int("driver.refinement", 16);
  d.hurst = cfg.get_double("driver.hurst", 0.5);
  d.ou_theta = cfg.get_double("driver.ou_theta", 1.0);
  d.ou_sigma = cfg.get_double("driver.ou_sigma", 1.0);
  d.mcshane_c = cfg.get_double("driver.mcshane_c", 0.0);
  d.noise_scale = cfg.get_double("driver.noise_scale", 1.0);
  d.cm_knot_times = cfg.get_list("driver.cm_knot_times", {});
  d.cm_knot_values = cfg.get_list("driver.cm_knot_values", {});
  d.cm_velocity = cfg.get_list("driver.cm_velocity", {});
  d.validate();

  const double lo = cfg.get_double("grid.lo", -1.0);
  const double hi = cfg.get_double("grid.hi", 1.0);
  const double h = cfg.get_double("grid.spacing", 0.05);
  s.evaluation = SpaceGrid::uniform(e, lo, hi, h);
  s.box = SpaceGrid::uniform(e, cfg.get_double("grid.box_lo", lo - 3.0), cfg.get_double("grid.box_hi", hi + 3.0), h);
  s.output_count = cfg.get_int("grid.output_count", 4);
  if (s.output_count < 1) throw Error(ErrorCode::config_error, "grid.output_count must be >= 1");

  s.rde.substeps = cfg.get_int("solver.substeps", 1);
  s.rde.scheme_step = cfg.get_int("solver.scheme_step", 0);
  s.pde.theta = cfg.get_double("solver.theta", 0.5);
  s.pde.boundary = parse_boundary(cfg.get_string("solver.boundary", "dirichlet"));
  s.pde.max_courant = cfg.get_double("solver.max_courant", 1.0);
  s.pde.max_substeps = cfg.get_int("solver.max_substeps", 64);
  return s;
}

// Every (M / count)-th grid time of x, including 0 and T.
std::vector<double> output_times(const RoughPathGrid& x, int count) {
  const std::size_t m = x.segments();
  if (m % static_cast<std::size_t>(count) != 0) {
    throw Error(ErrorCode::config_error, "grid.output_count must divide the driver grid size");
  }
  std::vector<double> out;
  for (std::size_t k = 0; k <= m; k += m / count) out.push_back(x.times()[k]);
  return out;
}

SampledPath subsample(const SampledPath& path, std::size_t stride) {
  SampledPath out;
  out.dim = path.dim;
  for (std::size_t i = 0; i < path.size(); i += stride) {
    out.times.push_back(path.times[i]);
    const auto v = path.at(i);
    out.values.insert(out.values.end(), v.begin(), v.end());
  }
  if ((path.size() - 1) % stride != 0) throw Error(ErrorCode::config_error, "ladder level does not divide the sample");
  return out;
}

enum class SolverKind { transport, second_order };

std::vector<SolverKind> parse_solvers(const std::string& text) {
  if (text == "transport") return {SolverKind::transport};
  if (text == "second_order") return {SolverKind::second_order};
  if (text == "both") return {SolverKind::transport, SolverKind::second_order};
  throw Error(ErrorCode::config_error, "solver.kind must be transport, second_order or both");
}

std::string to_string(SolverKind k) { return k == SolverKind::transport ? "transport" : "second_order"; }

ScalarField solve_with(SolverKind kind, const Setup& s, const RoughPathGrid& x,
                       std::span<const double> outs, Execution exec,
                       std::vector<DiagnosticsRow>* diagnostics = nullptr) {
  if (kind == SolverKind::transport) {
    return solve_transport(*s.fields, s.phi, x, outs, s.evaluation, s.rde, exec);
  }
  auto r = solve_second_order_rpde(s.coeffs, *s.fields, s.phi, x, s.box, s.evaluation, outs, s.pde,
                                   s.rde, exec);
  if (diagnostics) *diagnostics = r.diagnostics;
  return std::move(r.u);
}

// Solution of dv/dt = L v (zero driver) on the evaluation grid.
ScalarField deterministic_solution(SolverKind kind, const Setup& s, std::span<const double> times,
                                   std::span<const double> outs) {
  if (kind == SolverKind::transport) {
    ScalarField f;
    f.space = s.evaluation;
    f.times.assign(outs.begin(), outs.end());
    const auto pts = s.evaluation.points();
    const int e = s.evaluation.dim();
    for (std::size_t i = 0; i < outs.size(); ++i) {
      for (std::size_t j = 0; j < s.evaluation.size(); ++j) {
        f.values.push_back(s.phi.value(std::span<const double>(pts).subspan(j * e, e)));
      }
    }
    return f;
  }
  PlainCoefficientSource source(s.coeffs, s.box, std::vector<double>(times.begin(), times.end()));
  auto r = solve_parabolic(source, s.phi, s.box, times, outs, s.pde);
  return resample_field(r.field, s.evaluation);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Verdict verdict(const std::string& id, bool pass, const std::string& detail) {
  return Verdict{id, pass, detail};
}

// Monotone decrease over the last three levels with a minimum decay factor; a
// ladder whose final gaps are all zero has already converged.
Verdict convergence_verdict(const std::string& id, const std::vector<double>& gaps, double min_decay) {
  if (gaps.size() < 2) return verdict(id, false, "need at least three ladder levels");
  const double prev = gaps[gaps.size() - 2];
  const double last = gaps.back();
  const bool converged = prev == 0.0 && last == 0.0;
  const bool pass = converged || (last < prev && prev >= min_decay * last);
  return verdict(id, pass, "gaps " + format_number(prev) + " -> " + format_number(last));
}

}  // namespace

ExperimentResult run_wong_zakai(const Config& cfg) {
  Setup s = make_setup(cfg, "sine");
  if (s.driver.kind != DriverKind::brownian) throw Error(ErrorCode::config_error, "wong_zakai needs a Brownian driver");
  std::vector<double> ladder = cfg.get_list("ladder.levels", {64, 256, 1024});
  if (ladder.size() < 3) throw Error(ErrorCode::config_error, "ladder needs at least three levels");
  for (std::size_t i = 1; i < ladder.size(); ++i) {
    if (!(ladder[i] > ladder[i - 1])) throw Error(ErrorCode::config_error, "ladder must be strictly increasing");
  }
  const double min_decay = cfg.get_double("wong_zakai.min_decay", 1.3);
  const auto solvers = parse_solvers(cfg.get_string("solver.kind", "both"));

  DriverSpec fine = s.driver;
  fine.grid_size = static_cast<int>(ladder.back());
  const SampledPath path = sample_brownian_path(fine);
  const std::size_t fine_segments = path.size() - 1;

  std::vector<RoughPathGrid> lifts;
  for (double level : ladder) {
    const auto m = static_cast<std::size_t>(level);
    if (m == 0 || fine_segments % m != 0) throw Error(ErrorCode::config_error, "ladder level does not divide the sample");
    lifts.push_back(lift_piecewise_linear(subsample(path, fine_segments / m), 2, gaussian_lift_p(0.5)));
  }
  const std::vector<double> outs = output_times(lifts.front(), s.output_count);

  ExperimentResult result;
  result.experiment = "wong_zakai";
  result.results.header = {"solver", "level_from", "level_to", "sup_gap"};
  for (SolverKind kind : solvers) {
    std::vector<ScalarField> fields;
    for (std::size_t l = 0; l < lifts.size(); ++l) {
      const bool finest = l + 1 == lifts.size() && kind == SolverKind::second_order;
      fields.push_back(solve_with(kind, s, lifts[l], outs, Execution::parallel,
                                  finest ? &result.diagnostics : nullptr));
    }
    std::vector<double> gaps;
    for (std::size_t l = 1; l < fields.size(); ++l) {
      gaps.push_back(sup_distance(fields[l - 1], fields[l]));
      result.results.rows.push_back({to_string(kind), format_number(ladder[l - 1]),
                                     format_number(ladder[l]), format_number(gaps.back())});
    }
    result.verdicts.push_back(convergence_verdict("wong_zakai." + to_string(kind), gaps, min_decay));
  }
  return result;
}

ExperimentResult run_mcshane_drift(const Config& cfg) {
  Setup s = make_setup(cfg, "rotation");
  if (s.fields->fields() != 2) throw Error(ErrorCode::config_error, "mcshane_drift needs d = 2 fields");
  const double c = cfg.get_double("mcshane.c", 0.5);
  const double tolerance = cfg.get_double("mcshane.tolerance", 1e-3);
  const int seeds = cfg.get_int("mcshane.seeds", 4);
  const auto pts = s.evaluation.points();
  const int e = s.evaluation.dim();
  const std::size_t n = s.evaluation.size();

  double bracket = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (double b : lie_bracket(*s.fields, 0, 1, std::span<const double>(pts).subspan(j * e, e))) {
      bracket = std::max(bracket, std::abs(b));
    }
  }
  if (bracket < 1e-12) {
    throw Error(ErrorCode::config_error, "preset has a vanishing Lie bracket; the drift test is vacuous");
  }

  DriverSpec spec = s.driver;
  spec.kind = DriverKind::brownian;
  spec.dim = 2;
  const double p = gaussian_lift_p(0.5);
  // gap[seed][0] with c = 0, gap[seed][1] with the configured c.
  std::vector<std::array<double, 2>> gaps(seeds);
  detail::for_each_index(Execution::parallel, seeds, [&](std::ptrdiff_t k) {
    DriverSpec local = spec;
    local.seed = trajectory_seed(spec.seed, static_cast<std::uint64_t>(k));
    const SampledPath path = sample_brownian_path(local);
    const RoughPathGrid base = lift_piecewise_linear(path, 2, p, local.refinement);
    const RoughPathGrid time_space = time_space_lift(path, 2, p, local.refinement);
    for (int which = 0; which < 2; ++which) {
      const double cc = which == 0 ? 0.0 : c;
      const RoughPathGrid tilde = add_area_drift(base, cc);
      const BracketDriftFieldSet drifted(s.fields, cc);
      const DriverIncrements a_steps = increments_of(tilde, s.rde.substeps, s.rde.scheme_step);
      const DriverIncrements b_steps = increments_of(time_space, s.rde.substeps, s.rde.scheme_step);
      double worst = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const auto y = std::span<const double>(pts).subspan(j * e, e);
        const auto ya = solve_rde_endpoint(*s.fields, y, a_steps, s.rde);
        const auto yb = solve_rde_endpoint(drifted, y, b_steps, s.rde);
        for (int a = 0; a < e; ++a) worst = std::max(worst, std::abs(ya[a] - yb[a]));
      }
      gaps[k][which] = worst;
    }
  });

  ExperimentResult result;
  result.experiment = "mcshane_drift";
  result.results.header = {"seed_index", "c", "endpoint_sup_gap"};
  double worst_zero = 0.0;
  double worst_c = 0.0;
  for (int k = 0; k < seeds; ++k) {
    result.results.rows.push_back({std::to_string(k), format_number(0.0), format_number(gaps[k][0])});
    result.results.rows.push_back({std::to_string(k), format_number(c), format_number(gaps[k][1])});
    worst_zero = std::max(worst_zero, gaps[k][0]);
    worst_c = std::max(worst_c, gaps[k][1]);
  }
  result.verdicts.push_back(verdict("mcshane_drift.gap", worst_c < tolerance, "max gap " + format_number(worst_c)));
  result.verdicts.push_back(
      verdict("mcshane_drift.zero_drift", worst_zero <= 1e-10, "max gap " + format_number(worst_zero)));
  return result;
}

ExperimentResult run_continuity(const Config& cfg) {
  Setup s = make_setup(cfg, "sine");
  const auto kind = parse_solvers(cfg.get_string("solver.kind", "transport")).front();
  std::vector<double> lambdas = cfg.get_list("continuity.lambdas", {1.0, 0.5, 0.25, 0.125});
  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
  lambdas.push_back(0.0);

  DriverSpec spec = s.driver;
  spec.kind = DriverKind::brownian;
  const SampledPath base = sample_brownian_path(spec);
  const SampledPath h = make_cameron_martin(spec).sample(base.times);
  const double p = gaussian_lift_p(0.5);

  std::vector<RoughPathGrid> lifts;
  for (double lambda : lambdas) {
    SampledPath z = base;
    for (std::size_t i = 0; i < z.values.size(); ++i) {
      z.values[i] = h.values[i] + lambda * (base.values[i] - h.values[i]);
    }
    lifts.push_back(lift_piecewise_linear(z, 2, p, spec.refinement));
  }
  const RoughPathGrid& target = lifts.back();
  const std::vector<double> outs = output_times(target, s.output_count);
  const ScalarField reference = solve_with(kind, s, target, outs, Execution::parallel);

  ExperimentResult result;
  result.experiment = "continuity";
  result.results.header = {"lambda", "holder_distance", "sup_gap"};
  std::vector<double> distances, gaps;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double dist = holder_distance(lifts[i], target);
    const double gap = sup_distance(solve_with(kind, s, lifts[i], outs, Execution::parallel), reference);
    distances.push_back(dist);
    gaps.push_back(gap);
    result.results.rows.push_back({format_number(lambdas[i]), format_number(dist), format_number(gap)});
  }
  bool monotone = true;
  for (std::size_t i = 1; i < gaps.size(); ++i) {
    monotone = monotone && distances[i] <= distances[i - 1] && gaps[i] <= gaps[i - 1];
  }
  result.verdicts.push_back(verdict("continuity.monotone", monotone, "gaps follow the Hoelder distance"));
  result.verdicts.push_back(verdict("continuity.zero_perturbation", gaps.back() == 0.0,
                                    "gap " + format_number(gaps.back())));
  return result;
}

ExperimentResult run_small_noise(const Config& cfg) {
  Setup s = make_setup(cfg, "sine");
  const auto kind = parse_solvers(cfg.get_string("solver.kind", "second_order")).front();
  std::vector<double> eps = cfg.get_list("small_noise.eps", {1.0, 0.25, 0.0625});
  std::sort(eps.begin(), eps.end(), std::greater<>());
  const int seeds = cfg.get_int("small_noise.seeds", 32);
  if (seeds < 1) throw Error(ErrorCode::config_error, "small_noise.seeds must be >= 1");

  DriverSpec spec = s.driver;
  spec.kind = DriverKind::brownian;
  const std::vector<double> times = spec.output_times();
  std::vector<double> outs;
  {
    const std::size_t m = spec.grid_size;
    if (m % s.output_count != 0) throw Error(ErrorCode::config_error, "grid.output_count must divide the grid size");
    for (std::size_t k = 0; k <= m; k += m / s.output_count) outs.push_back(times[k]);
  }
  const ScalarField reference = deterministic_solution(kind, s, times, outs);

  std::vector<std::vector<double>> gaps(eps.size(), std::vector<double>(seeds));
  double zero_gap = 0.0;
  detail::for_each_index(Execution::parallel, seeds, [&](std::ptrdiff_t k) {
    DriverSpec local = spec;
    local.seed = trajectory_seed(spec.seed, static_cast<std::uint64_t>(k));
    const RoughPathGrid x = sample_brownian_lift(local);
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const ScalarField u = solve_with(kind, s, dilate_path(std::sqrt(eps[i]), x), outs, Execution::serial);
      gaps[i][k] = sup_distance(u, reference);
    }
    if (k == 0) {
      zero_gap = sup_distance(solve_with(kind, s, dilate_path(0.0, x), outs, Execution::serial), reference);
    }
  });

  ExperimentResult result;
  result.experiment = "small_noise";
  result.results.header = {"eps", "seed_index", "sup_gap"};
  std::vector<double> medians;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    for (int k = 0; k < seeds; ++k) {
      result.results.rows.push_back({format_number(eps[i]), std::to_string(k), format_number(gaps[i][k])});
    }
    medians.push_back(median(gaps[i]));
    result.results.rows.push_back({format_number(eps[i]), "median", format_number(medians.back())});
  }
  result.results.rows.push_back({format_number(0.0), "0", format_number(zero_gap)});
  bool decreasing = true;
  for (std::size_t i = 1; i < medians.size(); ++i) decreasing = decreasing && medians[i] < medians[i - 1];
  std::string listed;
  for (double m : medians) listed += (listed.empty() ? "medians " : " -> ") + format_number(m);
  result.verdicts.push_back(verdict("small_noise.median_decreasing", decreasing, listed));
  result.verdicts.push_back(verdict("small_noise.zero_noise", zero_gap == 0.0, "gap " + format_number(zero_gap)));

  if (!spec.cm_velocity.empty() && spec.cm_knot_times.empty()) {
    const double a = action(make_cameron_martin(spec));
    double v2 = 0.0;
    for (double v : spec.cm_velocity) v2 += v * v;
    const double closed = 0.5 * v2 * spec.horizon;
    result.results.rows.push_back({"action", "", format_number(a)});
    result.verdicts.push_back(verdict("small_noise.action_linear",
                                      std::abs(a - closed) <= 1e-12 * std::max(1.0, closed),
                                      "action " + format_number(a)));
  }
  return result;
}

ExperimentResult run_transport_demo(const Config& cfg) {
  Setup s = make_setup(cfg, "sine");
  const RoughPathGrid x = sample_lift(s.driver);
  const std::vector<double> outs = output_times(x, s.output_count);
  const ScalarField u = solve_transport(*s.fields, s.phi, x, outs, s.evaluation, s.rde);

  ExperimentResult result;
  result.experiment = "transport_demo";
  std::ostringstream csv;
  write_scalar_field_csv(csv, u);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  std::stringstream head(line);
  for (std::string col; std::getline(head, col, ',');) result.results.header.push_back(col);
  while (std::getline(lines, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) row.push_back(cell);
    result.results.rows.push_back(std::move(row));
  }

  bool in_range = true;
  for (double v : u.values) in_range = in_range && std::isfinite(v) && v >= s.phi.lower && v <= s.phi.upper;
  result.verdicts.push_back(verdict("transport_demo.range", in_range, "values within the range of phi"));
  const auto pts = s.evaluation.points();
  const int e = s.evaluation.dim();
  bool initial = true;
  for (std::size_t j = 0; j < s.evaluation.size(); ++j) {
    initial = initial && u.at_time(0)[j] == s.phi.value(std::span<const double>(pts).subspan(j * e, e));
  }
  result.verdicts.push_back(verdict("transport_demo.initial", initial, "u(0) = phi"));
  return result;
}

ExperimentResult run_parabolic_demo(const Config& cfg) {
  Setup s = make_setup(cfg, "sine");
  const RoughPathGrid x = sample_lift(s.driver);
  const std::vector<double> outs = output_times(x, s.output_count);
  const auto r = solve_second_order_rpde(s.coeffs, *s.fields, s.phi, x, s.box, s.evaluation, outs,
                                         s.pde, s.rde);

  ExperimentResult result;
  result.experiment = "parabolic_demo";
  result.diagnostics = r.diagnostics;
  const int e = s.evaluation.dim();
  result.results.header = {"t"};
  for (int a = 0; a < e; ++a) result.results.header.push_back("y_" + std::to_string(a + 1));
  result.results.header.push_back("u");
  const auto pts = s.evaluation.points();
  for (std::size_t i = 0; i < r.u.times.size(); ++i) {
    for (std::size_t j = 0; j < s.evaluation.size(); ++j) {
      std::vector<std::string> row{format_number(r.u.times[i])};
      for (int a = 0; a < e; ++a) row.push_back(format_number(pts[j * e + a]));
      row.push_back(format_number(r.u.at_time(i)[j]));
      result.results.rows.push_back(std::move(row));
    }
  }

  double lambda = std::numeric_limits<double>::infinity();
  double outside = 0.0;
  for (const auto& row : r.diagnostics) {
    lambda = std::min(lambda, row.ellipticity_lower_bound);
    outside = std::max(outside, row.out_of_box_fraction);
  }
  const auto v0 = r.v.at_time(0);
  const double lo = *std::min_element(v0.begin(), v0.end());
  const double hi = *std::max_element(v0.begin(), v0.end());
  bool in_range = true;
  for (double v : r.u.values) in_range = in_range && v >= lo - r.range_slack && v <= hi + r.range_slack;
  result.verdicts.push_back(verdict("parabolic_demo.ellipticity", lambda > 0.0, "Lambda " + format_number(lambda)));
  result.verdicts.push_back(verdict("parabolic_demo.margin", r.margin_ok, "margin " + format_number(r.margin_fraction)));
  result.verdicts.push_back(verdict("parabolic_demo.out_of_box", outside == 0.0, "fraction " + format_number(outside)));
  result.verdicts.push_back(verdict("parabolic_demo.range", in_range && r.range_slack < 1e-3,
                                    "slack " + format_number(r.range_slack)));
  return result;
}

ExperimentResult run_action(const Config& cfg) {
  Setup s = make_setup(cfg, "sine");
  DriverSpec spec = s.driver;
  spec.kind = DriverKind::cameron_martin;
  const CameronMartinPath h = make_cameron_martin(spec);
  const double a = action(h);
  const RoughPathGrid x = lift_cameron_martin(h, spec.output_times(), 2);
  const std::vector<double> outs = output_times(x, s.output_count);
  const ScalarField u = solve_transport(*s.fields, s.phi, x, outs, s.evaluation, s.rde);
  double sup = 0.0;
  for (double v : u.values) sup = std::max(sup, std::abs(v));

  ExperimentResult result;
  result.experiment = "action";
  result.results.header = {"quantity", "value"};
  result.results.rows.push_back({"action", format_number(a)});
  result.results.rows.push_back({"solution_sup", format_number(sup)});
  if (spec.cm_knot_times.empty()) {
    double v2 = 0.0;
    for (double v : spec.cm_velocity) v2 += v * v;
    const double closed = 0.5 * v2 * spec.horizon;
    result.results.rows.push_back({"closed_form", format_number(closed)});
    result.verdicts.push_back(verdict("action.closed_form", std::abs(a - closed) <= 1e-12 * std::max(1.0, closed),
                                      "action " + format_number(a)));
  }
  result.verdicts.push_back(verdict("action.finite", std::isfinite(a) && std::isfinite(sup), "finite"));
  return result;
}

ExperimentResult run_experiment(const std::string& name, const Config& cfg) {
  if (name == "wong_zakai") return run_wong_zakai(cfg);
  if (name == "mcshane_drift") return run_mcshane_drift(cfg);
  if (name == "continuity") return run_continuity(cfg);
  if (name == "small_noise") return run_small_noise(cfg);
  if (name == "transport_demo") return run_transport_demo(cfg);
  if (name == "parabolic_demo") return run_parabolic_demo(cfg);
  if (name == "action") return run_action(cfg);
  throw Error(ErrorCode::config_error, "unknown experiment '" + name + "'");
}

namespace {

template <class Writer>
void write_atomically(const std::filesystem::path& target, Writer&& writer) {
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + tmp.string());
    writer(out);
    out.flush();
    if (!out) throw Error(ErrorCode::io_error, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_atomically(dir / "results.csv", [&](std::ostream& out) { write_table_csv(out, result.results); });
  write_atomically(dir / "diagnostics.csv",
                   [&](std::ostream& out) { write_diagnostics_csv(out, result.diagnostics); });
  write_atomically(dir / "verdicts.txt", [&](std::ostream& out) {
    for (const auto& v : result.verdicts) out << (v.pass ? "PASS " : "FAIL ") << v.id << '\n';
  });
}

}  // namespace roughpde
