#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roughpde/parabolic.hpp"

namespace roughpde {

// Flat `section.key = value` configuration. Lines starting with '#' and blank
// lines are ignored.
class Config {
 public:
  static Config parse(std::istream& in);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  // Comma-separated numbers.
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  // Numeric entries of a section, keyed without the section prefix; `preset`
  // is skipped.
  std::map<std::string, double> section_params(const std::string& section) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

inline const std::vector<std::string> kExperiments = {
    "wong_zakai", "mcshane_drift", "continuity", "small_noise",
    "transport_demo", "parabolic_demo", "action"};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// %.17g
std::string format_number(double v);
void write_table_csv(std::ostream& out, const Table& table);

struct Verdict {
  std::string id;
  bool pass = false;
  std::string detail;
};

struct ExperimentResult {
  std::string experiment;
  Table results;
  std::vector<DiagnosticsRow> diagnostics;
  std::vector<Verdict> verdicts;

  bool all_pass() const;
};

ExperimentResult run_wong_zakai(const Config& cfg);
ExperimentResult run_mcshane_drift(const Config& cfg);
ExperimentResult run_continuity(const Config& cfg);
ExperimentResult run_small_noise(const Config& cfg);
ExperimentResult run_transport_demo(const Config& cfg);
ExperimentResult run_parabolic_demo(const Config& cfg);
ExperimentResult run_action(const Config& cfg);

ExperimentResult run_experiment(const std::string& name, const Config& cfg);

// results.csv, diagnostics.csv and verdicts.txt, each written to a temporary
// file and renamed into place.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace roughpde
