#include "towerdebias/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "towerdebias/debias.hpp"
#include "towerdebias/error.hpp"

namespace tdb {

Correlation pearson(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    fail(ErrorKind::InvalidArgument, "pearson inputs differ in length");
  }
  if (u.size() < 2) fail(ErrorKind::InvalidArgument, "pearson needs at least 2 values");

  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i]) || !std::isfinite(v[i])) {
      fail(ErrorKind::InvalidArgument, "pearson inputs must be finite");
    }
    mu += u[i];
    mv += v[i];
  }
  mu /= static_cast<double>(u.size());
  mv /= static_cast<double>(v.size());
  double suu = 0.0, svv = 0.0, suv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double du = u[i] - mu;
    const double dv = v[i] - mv;
    suu += du * du;
    svv += dv * dv;
    suv += du * dv;
  }
  const double dof = static_cast<double>(u.size() - 1);
  if (suu / dof < kConstantVarianceThreshold || svv / dof < kConstantVarianceThreshold) {
    return Correlation::undefined();
  }
  const double r = suv / std::sqrt(suu * svv);
  return {std::clamp(r, -1.0, 1.0)};
}

double mape(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) {
    fail(ErrorKind::InvalidArgument, "mape inputs differ in length");
  }
  if (actual.empty()) fail(ErrorKind::InvalidArgument, "mape needs at least 1 value");
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) sum += std::abs(actual[i] - predicted[i]);
  return sum / static_cast<double>(actual.size());
}

double misclassification_rate(std::span<const double> actual,
                              std::span<const double> predicted) {
  if (actual.size() != predicted.size()) {
    fail(ErrorKind::InvalidArgument, "label vectors differ in length");
  }
  if (actual.empty()) fail(ErrorKind::InvalidArgument, "no labels");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    for (double label : {actual[i], predicted[i]}) {
      if (label != 0.0 && label != 1.0) {
        fail(ErrorKind::InvalidArgument, "labels must be 0 or 1");
      }
    }
    wrong += actual[i] != predicted[i];
  }
  return static_cast<double>(wrong) / static_cast<double>(actual.size());
}

std::optional<double> SensitiveCorrelation::reduction() const {
  if (!baseline.defined() || !debiased.defined()) return std::nullopt;
  return std::abs(*baseline.value) - std::abs(*debiased.value);
}

nlohmann::json to_json(const Correlation& c) {
  return c.defined() ? nlohmann::json(*c.value) : nlohmann::json(nullptr);
}

nlohmann::json FairnessReport::to_json() const {
  auto corr = nlohmann::json::array();
  for (const auto& c : correlations) {
    const auto red = c.reduction();
    corr.push_back({{"name", c.name},
                    {"baseline_correlation", tdb::to_json(c.baseline)},
                    {"debiased_correlation", tdb::to_json(c.debiased)},
                    {"status", c.debiased.defined() ? "defined" : "undefined"},
                    {"reduction", red ? nlohmann::json(*red) : nlohmann::json(nullptr)}});
  }
  return {{"k", k},
          {"n_holdout", n_holdout},
          {"correlations", std::move(corr)},
          {"utility",
           {{"metric", utility.metric},
            {"baseline", utility.baseline},
            {"debiased", utility.debiased}}}};
}

FairnessReport fairness_report(const Dataset& holdout, std::span<const double> baseline,
                               std::span<const double> debiased, std::size_t k, Task task,
                               double threshold) {
  if (baseline.size() != holdout.rows() || debiased.size() != holdout.rows()) {
    fail(ErrorKind::SchemaMismatch, "prediction vectors are not aligned to holdout rows");
  }
  FairnessReport report;
  report.k = k;
  report.n_holdout = holdout.rows();
  for (const auto& c : holdout.columns()) {
    if (c.role != ColumnRole::Sensitive) continue;
    report.correlations.push_back(
        {c.name, pearson(baseline, c.values), pearson(debiased, c.values)});
  }
  if (report.correlations.empty()) {
    fail(ErrorKind::SchemaMismatch, "holdout has no sensitive columns");
  }

  const auto& y = holdout.target().values;
  if (task == Task::Regression) {
    report.utility = {"mape", mape(y, baseline), mape(y, debiased)};
  } else {
    report.utility = {"misclassification_rate",
                      misclassification_rate(y, classify(baseline, threshold)),
                      misclassification_rate(y, classify(debiased, threshold))};
  }
  return report;
}

}  // namespace tdb
