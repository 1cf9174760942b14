#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "towerdebias/matrix.hpp"

namespace tdb {

enum class ColumnRole { Target, Feature, Sensitive, Ignored };
enum class ColumnKind { Numeric, Categorical };
enum class Task { Regression, Classification };

std::string_view to_string(ColumnRole role);
std::string_view to_string(ColumnKind kind);
std::string_view to_string(Task task);
ColumnRole parse_role(std::string_view text);
Task parse_task(std::string_view text);

struct ColumnSpec {
  std::string name;
  ColumnRole role = ColumnRole::Ignored;
  // unset: inferred from the data (numeric iff every value parses as a number)
  std::optional<ColumnKind> kind;
};

/// Role assignment for the columns of a CSV file.
///
/// JSON form is an object mapping column name to either a role string
/// ("target", "feature", "sensitive", "ignored") or an object
/// {"role": ..., "kind": "numeric" | "categorical"}.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnSpec> columns);

  static Schema from_json(const nlohmann::json& doc);
  static Schema load(const std::filesystem::path& path);

  const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }
  const ColumnSpec* find(std::string_view name) const;

  /// Exactly one target, at least one feature and one sensitive column.
  void validate() const;

 private:
  std::vector<ColumnSpec> columns_;
};

/// One encoded column. Categorical source columns expand into one 0/1 dummy
/// per level, named "<source>=<level>".
struct Column {
  std::string name;
  std::string source;
  ColumnRole role = ColumnRole::Feature;
  ColumnKind kind = ColumnKind::Numeric;
  std::string level;  // dummy level; empty for numeric columns
  std::vector<double> values;

  bool is_dummy() const noexcept {
    return kind == ColumnKind::Categorical && role != ColumnRole::Target;
  }
};

/// Levels of a categorical source column, sorted lexicographically. For a
/// binary target, levels[0] encodes to 0 and levels[1] to 1.
struct CategoricalEncoding {
  std::string column;
  ColumnRole role = ColumnRole::Feature;
  std::vector<std::string> levels;
  std::vector<std::string> dummy_names;  // empty for the target
};

struct LoadOptions {
  bool drop_missing = false;
};

/// Encoded table. Immutable after construction; row_ids are the 0-based data
/// row indices of the source file.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Column> columns, std::vector<CategoricalEncoding> encodings,
          std::vector<std::size_t> row_ids, std::size_t dropped_rows = 0);

  std::size_t rows() const noexcept { return row_ids_.size(); }
  std::span<const Column> columns() const noexcept { return columns_; }
  std::span<const CategoricalEncoding> encodings() const noexcept {
    return encodings_;
  }
  std::span<const std::size_t> row_ids() const noexcept { return row_ids_; }
  std::size_t dropped_rows() const noexcept { return dropped_rows_; }

  bool has_column(std::string_view name) const;
  const Column& column(std::string_view name) const;
  const Column& target() const;
  const CategoricalEncoding* encoding(std::string_view source) const;

  /// Encoded column names with the given role, in table order.
  std::vector<std::string> names(ColumnRole role) const;

  /// Regression unless the target is a binary categorical or only holds 0/1.
  Task infer_task() const;

  /// Original level of a categorical source column at a row.
  std::string decode(std::string_view source, std::size_t row) const;

  /// Row-major matrix of the named columns.
  RowMatrix matrix(std::span<const std::string> names) const;

  /// Subset of rows, in the order given.
  Dataset select_rows(std::span<const std::size_t> rows) const;

  /// Copy with the values of one column replaced.
  Dataset with_values(std::string_view name, std::vector<double> values) const;

 private:
  std::vector<Column> columns_;
  std::vector<CategoricalEncoding> encodings_;
  std::vector<std::size_t> row_ids_;
  std::size_t dropped_rows_ = 0;
};

/// Builds a Dataset from a parsed CSV table.
Dataset encode(const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const Schema& schema, const LoadOptions& options = {});

Dataset load_csv(const std::filesystem::path& path, const Schema& schema,
                 const LoadOptions& options = {});

/// Per-column z-score transform. Numeric columns use train statistics
/// (sample standard deviation); one-hot dummy columns pass through unchanged
/// so they enter distances as 0/1 coordinates.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::vector<std::string> names, std::vector<double> means,
               std::vector<double> sds);

  /// Throws ConstantColumn for a numeric column with zero variance.
  static Standardizer fit(const Dataset& data, std::span<const std::string> columns);

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<double>& means() const noexcept { return means_; }
  const std::vector<double>& sds() const noexcept { return sds_; }

  double apply(std::size_t j, double value) const {
    return (value - means_[j]) / sds_[j];
  }
  double invert(std::size_t j, double value) const {
    return value * sds_[j] + means_[j];
  }

  /// Standardized matrix of this standardizer's columns taken from data.
  RowMatrix transform(const Dataset& data) const;
  RowMatrix transform(const RowMatrix& raw) const;
  RowMatrix inverse(const RowMatrix& standardized) const;

 private:
  std::vector<std::string> names_;
  std::vector<double> means_;
  std::vector<double> sds_;
};

struct SplitPlan {
  double holdout_fraction = 0.2;
  std::size_t n_replicates = 25;
  std::uint64_t base_seed = 0;

  void validate() const;
  std::uint64_t seed_for(std::size_t replicate) const {
    return base_seed + replicate;
  }
};

/// Positions (into the dataset's rows) of one train/holdout partition. Both
/// lists are sorted ascending.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

std::size_t holdout_size(std::size_t rows, double fraction);
SplitIndices split_indices(std::size_t rows, const SplitPlan& plan,
                           std::size_t replicate);
std::pair<Dataset, Dataset> split(const Dataset& data, const SplitPlan& plan,
                                  std::size_t replicate);

/// Summary of an encoded dataset (rows, dropped rows, columns, encodings).
nlohmann::json describe(const Dataset& data);

}  // namespace tdb
