#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace condwalk::harness {

// Experiment families the runner knows how to drive.
enum class Experiment {
  persistence,
  local,
  caravenna,
  exit,
  interval,
  cdf,
  duality,
  kernel_identities,
  renewal,
  llt_rate,
  fuk_nagaev,
  level_sets,
};

Experiment experiment_from_name(const std::string& name);  // ConfigError
std::string experiment_name(Experiment experiment);

enum class Format { csv, json };

// One section of a config file, with the keys set before the first section
// already merged in.
struct ExperimentConfig {
  std::string label;
  Experiment experiment = Experiment::persistence;
  std::string law;  // builtin name, else a law-file path
  std::vector<int> n;
  std::vector<double> x;
  std::vector<double> y;  // doubles as the scaled threshold list for cdf
  std::vector<double> v;
  double u = 0.0;      // fuk-nagaev exceedance level; 0 picks sqrt(n log n)
  double alpha = 0.0;  // level-sets level; 0 picks n^{-q}
  double q = 0.0;      // regime-classification exponent; 0 disables tagging
  std::uint64_t seed = 1;
  std::int64_t paths = 100000;        // Monte Carlo oracle paths per cell
  std::int64_t table_paths = 20000;   // per grid point of a sampled V table
  int kterms = 20000;                 // series terms for renewal identities
  double xmax = 0.0;  // harmonic-table reach; 0 sizes it from the grids
  int threads = 1;
  std::string out;  // output path; empty writes to stdout
  Format format = Format::csv;
};

struct ReportRow {
  std::string experiment;
  int n = 0;
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double oracle = 0.0;
  double predictor = 0.0;
  double ratio = 0.0;
  double envelope = 0.0;
  double envelope_ratio = 0.0;
  std::vector<std::string> regimes;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct PredictionReport {
  std::vector<ReportRow> rows;

  friend bool operator==(const PredictionReport&,
                         const PredictionReport&) = default;
};

// `key = value` lines grouped by `[section]` blocks; every key seen before
// the first section is inherited by all sections.  `#` starts a comment and
// lists are comma-separated.  A section named after an experiment implies
// the `experiment` key.  A sectionless file describes one experiment; a file
// that sets no experiment at all parses to an empty run.
std::vector<ExperimentConfig> parse_config(const std::string& text);
std::vector<ExperimentConfig> load_config_file(const std::string& path);

// Per-cell RNG seed: a bit-mix of the config seed with the cell's position
// in the sorted grid enumeration, so the execution schedule cannot change
// any Monte Carlo value.
std::uint64_t cell_seed(std::uint64_t config_seed, std::uint64_t cell_index);

// Evaluates one experiment over its grids.  Rows come back sorted by
// (n, x, y, v).  Throws ConfigError for unusable configs; errors raised
// while evaluating a cell propagate with the cell coordinates prepended.
PredictionReport run_experiment(const ExperimentConfig& config);

// Runs every section in file order and concatenates the reports.
PredictionReport run_all(const std::vector<ExperimentConfig>& configs);

// CSV: exact header `experiment,n,x,y,v,oracle,predictor,ratio,envelope,
// envelope_ratio,regimes`, floats with 17 significant digits, regime tags
// joined by ';'.  JSON mirrors the columns.
std::string emit(const PredictionReport& report, Format format);

// Inverse of the CSV emitter, for round-trip checks and post-processing.
PredictionReport parse_report(const std::string& csv);

}  // namespace condwalk::harness
