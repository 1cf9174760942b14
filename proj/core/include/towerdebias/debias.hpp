#pragma once

#include <span>
#include <string>
#include <vector>

#include "towerdebias/data.hpp"
#include "towerdebias/matrix.hpp"
#include "towerdebias/neighbors.hpp"

namespace tdb {

struct DebiasConfig {
  std::size_t k = 25;
  // k larger than the reference set: clamp to its size (with a warning) or fail
  bool clamp = true;

  void validate() const;
};

struct DebiasResult {
  std::vector<double> values;  // estimates of E(Y | X), one per query row
  std::size_t k_used = 0;
  bool clamped = false;
  std::vector<std::string> warnings;
};

/// Reference rows in standardized feature space (sensitive columns excluded)
/// together with the black-box predictions to average. Immutable; queries
/// are read-only and may run concurrently.
class DebiasIndex {
 public:
  /// Fits the standardizer on the reference rows' feature columns.
  static DebiasIndex build(const Dataset& reference, std::span<const double> predictions);
  static DebiasIndex build(const Dataset& reference, std::span<const double> predictions,
                           Standardizer standardizer);

  std::size_t size() const noexcept { return predictions_.size(); }
  const std::vector<std::string>& feature_names() const noexcept {
    return standardizer_.names();
  }
  const Standardizer& standardizer() const noexcept { return standardizer_; }
  const std::vector<double>& predictions() const noexcept { return predictions_; }
  const RowMatrix& reference_features() const noexcept { return tree_.points(); }
  const std::vector<std::size_t>& reference_row_ids() const noexcept { return row_ids_; }

  /// k nearest reference rows to a raw (unstandardized) feature row.
  std::vector<Neighbor> neighbors(std::span<const double> raw_query, std::size_t k) const;

  /// Mean reference prediction over the k nearest rows of every query row.
  /// Queries must carry the index's feature columns; other columns are ignored.
  DebiasResult predict(const Dataset& queries, const DebiasConfig& config) const;
  /// Same, for raw feature rows ordered as feature_names().
  DebiasResult predict(const RowMatrix& raw_queries, const DebiasConfig& config) const;

 private:
  DebiasIndex(Standardizer standardizer, KdTree tree, std::vector<double> predictions,
              std::vector<std::size_t> row_ids);

  Standardizer standardizer_;
  KdTree tree_;
  std::vector<double> predictions_;
  std::vector<std::size_t> row_ids_;
};

inline DebiasResult debias_predict(const DebiasIndex& index, const Dataset& queries,
                                   const DebiasConfig& config) {
  return index.predict(queries, config);
}

/// Label 1 iff probability >= threshold. Threshold must lie in (0, 1).
std::vector<double> classify(std::span<const double> probabilities, double threshold = 0.5);

}  // namespace tdb
