#include "towerdebias/debias.hpp"

#include <algorithm>
#include <cmath>

#include "towerdebias/error.hpp"

namespace tdb {

void DebiasConfig::validate() const {
  if (k < 1) fail(ErrorKind::InvalidArgument, "k must be >= 1");
}

DebiasIndex::DebiasIndex(Standardizer standardizer, KdTree tree,
                         std::vector<double> predictions, std::vector<std::size_t> row_ids)
    : standardizer_(std::move(standardizer)),
      tree_(std::move(tree)),
      predictions_(std::move(predictions)),
      row_ids_(std::move(row_ids)) {}

DebiasIndex DebiasIndex::build(const Dataset& reference,
                               std::span<const double> predictions) {
  const auto features = reference.names(ColumnRole::Feature);
  return build(reference, predictions, Standardizer::fit(reference, features));
}

DebiasIndex DebiasIndex::build(const Dataset& reference,
                               std::span<const double> predictions,
                               Standardizer standardizer) {
  if (predictions.size() != reference.rows()) {
    fail(ErrorKind::SchemaMismatch,
         std::to_string(predictions.size()) + " predictions for " +
             std::to_string(reference.rows()) + " reference rows");
  }
  if (reference.rows() == 0) fail(ErrorKind::EmptyTable, "empty reference set");
  for (double p : predictions) {
    if (!std::isfinite(p)) {
      fail(ErrorKind::MalformedInput, "reference predictions must be finite");
    }
  }
  const auto features = reference.names(ColumnRole::Feature);
  for (const auto& name : standardizer.names()) {
    if (reference.column(name).role != ColumnRole::Feature) {
      fail(ErrorKind::SchemaMismatch,
           "column '" + name + "' is not a feature and cannot enter the index");
    }
  }
  for (const auto& name : features) {
    if (std::find(standardizer.names().begin(), standardizer.names().end(), name) ==
        standardizer.names().end()) {
      fail(ErrorKind::SchemaMismatch, "standardizer lacks feature '" + name + "'");
    }
  }

  KdTree tree(standardizer.transform(reference));
  const auto ids = reference.row_ids();
  return DebiasIndex(std::move(standardizer), std::move(tree),
                     std::vector<double>(predictions.begin(), predictions.end()),
                     std::vector<std::size_t>(ids.begin(), ids.end()));
}

std::vector<Neighbor> DebiasIndex::neighbors(std::span<const double> raw_query,
                                             std::size_t k) const {
  if (raw_query.size() != standardizer_.names().size()) {
    fail(ErrorKind::SchemaMismatch, "query row has the wrong number of features");
  }
  std::vector<double> q(raw_query.size());
  for (std::size_t j = 0; j < q.size(); ++j) q[j] = standardizer_.apply(j, raw_query[j]);
  return tree_.knn(q, k);
}

DebiasResult DebiasIndex::predict(const Dataset& queries, const DebiasConfig& config) const {
  for (const auto& name : feature_names()) {
    if (!queries.has_column(name)) {
      fail(ErrorKind::SchemaMismatch, "query rows lack feature column '" + name + "'");
    }
  }
  return predict(queries.matrix(feature_names()), config);
}

DebiasResult DebiasIndex::predict(const RowMatrix& raw_queries,
                                  const DebiasConfig& config) const {
  config.validate();
  if (raw_queries.cols() != feature_names().size()) {
    fail(ErrorKind::SchemaMismatch, "query rows have the wrong number of features");
  }
  DebiasResult result;
  result.k_used = config.k;
  if (config.k > size()) {
    if (!config.clamp) {
      fail(ErrorKind::InvalidArgument, "k = " + std::to_string(config.k) +
                                           " exceeds the " + std::to_string(size()) +
                                           " reference rows");
    }
    result.k_used = size();
    result.clamped = true;
    result.warnings.push_back("k = " + std::to_string(config.k) + " clamped to " +
                              std::to_string(size()) + " reference rows");
  }

  const auto q = standardizer_.transform(raw_queries);
  result.values.resize(q.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    result.values[i] = neighbor_mean(tree_.knn(q.row(i), result.k_used), predictions_);
  }
  return result;
}

std::vector<double> classify(std::span<const double> probabilities, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    fail(ErrorKind::InvalidArgument, "classification threshold must lie in (0, 1)");
  }
  std::vector<double> labels(probabilities.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probabilities[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      fail(ErrorKind::OutOfRange, "probability outside [0, 1]");
    }
    labels[i] = p >= threshold ? 1.0 : 0.0;
  }
  return labels;
}

}  // namespace tdb
