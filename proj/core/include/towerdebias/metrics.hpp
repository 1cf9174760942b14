#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "towerdebias/data.hpp"

namespace tdb {

/// Sample Pearson correlation, or no value when either input is constant
/// (sample variance below 1e-24).
struct Correlation {
  std::optional<double> value;

  bool defined() const noexcept { return value.has_value(); }
  static Correlation undefined() { return {}; }
};

inline constexpr double kConstantVarianceThreshold = 1e-24;

Correlation pearson(std::span<const double> u, std::span<const double> v);

/// Mean absolute error in target units. Named after the "mean absolute
/// prediction error" usage, not a percentage error.
double mape(std::span<const double> actual, std::span<const double> predicted);

/// Fraction of mismatched 0/1 labels.
double misclassification_rate(std::span<const double> actual,
                              std::span<const double> predicted);

struct SensitiveCorrelation {
  std::string name;  // sensitive column or dummy ("race=Black")
  Correlation baseline;
  Correlation debiased;

  /// |baseline| - |debiased|; empty when either side is undefined.
  std::optional<double> reduction() const;
};

struct Utility {
  std::string metric;  // "mape" or "misclassification_rate"
  double baseline = 0.0;
  double debiased = 0.0;
};

struct FairnessReport {
  std::vector<SensitiveCorrelation> correlations;
  Utility utility;
  std::size_t k = 0;
  std::size_t n_holdout = 0;

  nlohmann::json to_json() const;
};

/// Correlations against every sensitive column (all dummy levels kept) and
/// the task's utility metric. For classification, correlations use the
/// probabilities and utility uses labels from classify(threshold).
FairnessReport fairness_report(const Dataset& holdout, std::span<const double> baseline,
                               std::span<const double> debiased, std::size_t k, Task task,
                               double threshold = 0.5);

nlohmann::json to_json(const Correlation& c);

}  // namespace tdb
