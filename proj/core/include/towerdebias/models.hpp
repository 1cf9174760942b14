#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "towerdebias/data.hpp"
#include "towerdebias/matrix.hpp"
#include "towerdebias/neighbors.hpp"

namespace tdb {

enum class ModelKind { Linear, Logistic, Knn, External };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct FitConfig {
  double ridge_epsilon = 1e-8;  // added to the normal-equation diagonal
  std::size_t max_iterations = 100;
  double tolerance = 1e-8;  // on the max absolute coefficient change
  std::size_t knn = 10;     // neighbor count of the kNN baseline
  double separation_guard = 1e6;

  void validate() const;
};

struct FitDiagnostics {
  bool converged = true;
  std::size_t iterations = 0;
  std::vector<double> log_likelihood;  // logistic: one entry per accepted step
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Estimates E(Y | X, S). Immutable after fitting; predict() is thread-safe.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual ModelKind kind() const = 0;
  virtual Task task() const = 0;
  /// One finite value per row; probabilities for classification.
  virtual std::vector<double> predict(const Dataset& rows) const = 0;
  virtual nlohmann::json to_json() const = 0;

  const FitDiagnostics& diagnostics() const noexcept { return diagnostics_; }

 protected:
  FitDiagnostics diagnostics_;
};

/// Columns entering linear and logistic designs: features then sensitive
/// columns, with the first (reference) dummy of every categorical group
/// dropped. An intercept column is prepended by design_matrix().
std::vector<std::string> design_columns(const Dataset& data);

/// Intercept column followed by the named columns.
RowMatrix design_matrix(const Dataset& data, std::span<const std::string> columns);

/// Coefficient-based model; coefficients()[0] is the intercept.
class LinearPredictor : public Predictor {
 public:
  LinearPredictor(ModelKind kind, std::vector<std::string> columns,
                  std::vector<double> coefficients, FitDiagnostics diagnostics = {});

  ModelKind kind() const override { return kind_; }
  Task task() const override {
    return kind_ == ModelKind::Logistic ? Task::Classification : Task::Regression;
  }
  std::vector<double> predict(const Dataset& rows) const override;
  nlohmann::json to_json() const override;

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<double>& coefficients() const noexcept { return coefficients_; }

 private:
  ModelKind kind_;
  std::vector<std::string> columns_;
  std::vector<double> coefficients_;
};

/// Averages the targets of the k nearest training rows in standardized
/// (X, S) space.
class KnnPredictor : public Predictor {
 public:
  KnnPredictor(Task task, std::size_t k, Standardizer standardizer, RowMatrix raw_points,
               std::vector<double> targets);

  ModelKind kind() const override { return ModelKind::Knn; }
  Task task() const override { return task_; }
  std::vector<double> predict(const Dataset& rows) const override;
  nlohmann::json to_json() const override;

  std::size_t k() const noexcept { return k_; }

 private:
  Task task_;
  std::size_t k_;
  Standardizer standardizer_;
  RowMatrix raw_points_;
  std::vector<double> targets_;
  KdTree tree_;
};

/// Replays black-box predictions keyed by source-file row id.
class ExternalPredictor : public Predictor {
 public:
  ExternalPredictor(Task task, std::unordered_map<std::size_t, double> table);

  ModelKind kind() const override { return ModelKind::External; }
  Task task() const override { return task_; }
  std::vector<double> predict(const Dataset& rows) const override;
  nlohmann::json to_json() const override;

  /// Throws UnknownId for an id absent from the table.
  double lookup(std::size_t id) const;
  std::size_t size() const noexcept { return table_.size(); }

 private:
  Task task_;
  std::unordered_map<std::size_t, double> table_;
};

std::unique_ptr<LinearPredictor> fit_linear(const Dataset& train, const FitConfig& config);
std::unique_ptr<LinearPredictor> fit_logistic(const Dataset& train,
                                              const FitConfig& config);
std::unique_ptr<KnnPredictor> fit_knn_predictor(const Dataset& train,
                                                const FitConfig& config);
std::unique_ptr<KnnPredictor> fit_knn_predictor(const Dataset& train,
                                                const FitConfig& config, Task task);
std::unique_ptr<Predictor> fit_model(ModelKind kind, const Dataset& train,
                                     const FitConfig& config);

/// Reads a CSV with an id column and a prediction column.
std::unique_ptr<ExternalPredictor> load_external_predictions(
    const std::filesystem::path& path, Task task, std::string_view id_column = "id",
    std::string_view value_column = "prediction");

/// Rebuilds a model written by Predictor::to_json (external models excluded).
std::unique_ptr<Predictor> model_from_json(const nlohmann::json& doc);
std::unique_ptr<Predictor> load_model(const std::filesystem::path& path);

/// Writes "<id_column>,<value_column>" rows.
void write_predictions(const std::filesystem::path& path, std::span<const std::size_t> ids,
                       std::span<const double> values,
                       std::string_view value_column = "prediction");

namespace logistic {

double sigmoid(double t);

/// Bernoulli log-likelihood of y under P(y = 1) = sigmoid(design * beta).
double log_likelihood(const RowMatrix& design, std::span<const double> y,
                      std::span<const double> beta);

/// Gradient of log_likelihood with respect to beta.
std::vector<double> gradient(const RowMatrix& design, std::span<const double> y,
                             std::span<const double> beta);

}  // namespace logistic

}  // namespace tdb
