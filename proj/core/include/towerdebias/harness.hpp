#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "towerdebias/data.hpp"
#include "towerdebias/metrics.hpp"
#include "towerdebias/models.hpp"

namespace tdb {

std::vector<std::size_t> default_k_grid();

/// Repeated-holdout experiment. Relative paths resolve against base_dir
/// (the directory of the config file when loaded from disk).
struct ExperimentConfig {
  std::filesystem::path base_dir;
  std::filesystem::path data;
  std::filesystem::path schema;
  ModelKind model = ModelKind::Linear;
  std::filesystem::path predictions;  // external model only
  std::optional<Task> task;           // empty: inferred from the target
  std::vector<std::size_t> k_grid = default_k_grid();
  SplitPlan split{.holdout_fraction = 0.2, .n_replicates = 25, .base_seed = 1};
  double threshold = 0.5;
  FitConfig fit;
  bool drop_missing = false;
  bool clamp_k = true;
  std::filesystem::path output_dir;
  std::size_t threads = 0;  // 0: hardware concurrency; does not affect results

  void validate() const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;

  static ExperimentConfig from_json(const nlohmann::json& doc,
                                    const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Echo of the settings that determine results (paths as written).
  nlohmann::json to_json() const;
};

struct ReplicateResult {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_holdout = 0;
  std::vector<FairnessReport> reports;  // one per k_grid entry
  FitDiagnostics diagnostics;
  std::vector<std::string> warnings;
};

/// One metric value in long format. Utility rows have an empty level.
struct MetricRow {
  std::size_t k = 0;
  std::size_t replicate = 0;
  std::string sensitive_level;
  std::string metric;
  std::optional<double> value;  // empty: undefined correlation
};

struct MetricSummary {
  std::size_t k = 0;
  std::string sensitive_level;
  std::string metric;
  std::optional<double> mean;  // over replicates with a defined value
  std::optional<double> sd;    // sample standard deviation; needs 2 values
  std::size_t n = 0;
};

struct SweepResult {
  ExperimentConfig config;
  Task task = Task::Regression;
  std::vector<ReplicateResult> replicates;

  std::vector<MetricRow> rows() const;
  std::vector<MetricSummary> summary() const;
  /// Summary entry for (k, level, metric); throws when absent.
  MetricSummary find(std::size_t k, const std::string& level,
                     const std::string& metric) const;
  nlohmann::json to_json() const;
};

/// Per replicate: split, fit (or load) the model on train, predict train
/// and holdout, build the debias index over train only, then debias the
/// holdout for every k and score it.
SweepResult run_experiment(const ExperimentConfig& config);
SweepResult run_experiment(const ExperimentConfig& config, const Dataset& data);

/// Writes sweep.csv, summary.csv and report.json into dir.
void export_results(const SweepResult& result, const std::filesystem::path& dir);

}  // namespace tdb
