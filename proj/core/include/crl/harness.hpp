#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crl/gscalei.hpp"
#include "crl/metrics.hpp"
#include "crl/scm.hpp"
#include "crl/scores.hpp"

namespace crl::harness {

// First of the two hard interventions per node in gscalei runs.
inline constexpr double kGscaleFirstVarMultiplier = 0.25;

enum class Algorithm { lscalei, lscalei_fullrank, gscalei };

struct SweepSpec {
  std::string axis;  // n_s | noise_var | d | density
  std::vector<double> values;
};

struct ExperimentConfig {
  std::string name = "experiment";
  int n = 5;
  int d = 100;
  int n_s = 10000;
  double density = 0.5;
  ScmFamily scm = ScmFamily::linear;
  InterventionKind intervention = InterventionKind::hard;
  int envs_per_node = 1;
  bool coupled = true;
  ScoreMode score_mode = ScoreMode::oracle;
  double noise_var = 0.0;
  Algorithm algorithm = Algorithm::lscalei;
  std::optional<double> lambda_g;  // unset: default for the setting
  double lambda_eigv = 0.01;
  double hard_var_multiplier = 0.0;  // 0: family default (kGscaleFirstVarMultiplier for gscalei)
  double second_var_multiplier = kSecondHardVarMultiplier;
  gscalei::Config gscale;
  bool gscale_steps_set = false;  // false: steps follow default_steps(n)
  int n_graphs = 10;
  std::uint64_t seed = 0;
  std::optional<SweepSpec> sweep;
  bool dump_scores = false;
};

// All field-level problems, one per line as "field: message".
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::vector<std::string>& problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
// Throws ConfigError listing every violated constraint.
void validate(const ExperimentConfig& cfg);
// Canonical JSON form (sorted keys, resolved defaults).
std::string to_json(const ExperimentConfig& cfg);
// FNV-1a of the canonical form.
std::uint64_t config_hash(const ExperimentConfig& cfg);

double effective_lambda_g(const ExperimentConfig& cfg);

struct RunRecord {
  int graph = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | error message
  MetricReport metrics;
  double snr_db = 0.0;          // noisy scores only
  double fit_loss = 0.0;        // gscalei only
  int coupling_correct = -1;    // uncoupled gscalei: 1/0, otherwise -1
  double wall_seconds = 0.0;    // kept out of the CSV outputs
  bool ok() const { return status == "ok"; }
};

// Per-graph seed: derive_seed(master, graph index).
std::uint64_t graph_seed(std::uint64_t master, int graph);

// One full pipeline for graph index `graph`. dump_dir (if non-empty) receives
// the score-difference dataset.
RunRecord run_single(const ExperimentConfig& cfg, int graph, const std::string& dump_dir = "");

struct Summary {
  std::string metric;
  double mean = 0.0;
  double std_error = 0.0;  // sample std / sqrt(count)
  int count = 0;
};
// Means over successful runs, plus n_ok and n_failed counts.
std::vector<Summary> aggregate(const std::vector<RunRecord>& runs, const ExperimentConfig& cfg);
const Summary& find_summary(const std::vector<Summary>& s, const std::string& metric);

// Graph-level parallel run; records are ordered by graph index.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, int workers, const std::string& dump_root = "");

// Fixed column order, %.17g numbers.
std::string runs_csv(const std::vector<RunRecord>& runs, std::uint64_t hash);
std::string aggregate_csv(const std::vector<Summary>& s);

// Writes runs.csv, aggregate.csv and manifest.json into out_dir.
std::vector<RunRecord> cli_run(const ExperimentConfig& cfg, const std::string& out_dir, int workers);

// One cli_run per sweep value in out_dir/<axis>_<value>/ plus a long-format
// sweep.csv (axis, value, metric, mean, stderr, count).
void cli_sweep(const ExperimentConfig& cfg, const std::string& out_dir, int workers);
ExperimentConfig with_axis_value(const ExperimentConfig& cfg, const std::string& axis, double value);

struct ExtrapolationRow {
  int graph = 0;
  int target_a = 0;
  int target_b = 0;
  double max_residual = 0.0;
  double mean_residual = 0.0;
};
// For every pair of distinct nodes: sum of the two single hard-intervention
// observed diffs versus the diff of the jointly intervened model.
std::vector<ExtrapolationRow> extrapolation_residuals(const ExperimentConfig& cfg, int graph);
void cli_extrapolate(const ExperimentConfig& cfg, const std::string& out_dir, int workers);

}  // namespace crl::harness
