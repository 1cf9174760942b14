#include "towerdebias/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "towerdebias/csv.hpp"
#include "towerdebias/error.hpp"

namespace tdb {

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::Target: return "target";
    case ColumnRole::Feature: return "feature";
    case ColumnRole::Sensitive: return "sensitive";
    case ColumnRole::Ignored: return "ignored";
  }
  return "ignored";
}

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::Numeric ? "numeric" : "categorical";
}

std::string_view to_string(Task task) {
  return task == Task::Regression ? "regression" : "classification";
}

ColumnRole parse_role(std::string_view text) {
  if (text == "target") return ColumnRole::Target;
  if (text == "feature") return ColumnRole::Feature;
  if (text == "sensitive") return ColumnRole::Sensitive;
  if (text == "ignored") return ColumnRole::Ignored;
  fail(ErrorKind::MalformedInput, "unknown column role '" + std::string(text) + "'");
}

Task parse_task(std::string_view text) {
  if (text == "regression") return Task::Regression;
  if (text == "classification") return Task::Classification;
  fail(ErrorKind::InvalidArgument, "unknown task '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Schema

Schema::Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {}

Schema Schema::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) {
    fail(ErrorKind::MalformedInput, "schema must be a JSON object");
  }
  std::vector<ColumnSpec> columns;
  for (const auto& [name, value] : doc.items()) {
    ColumnSpec spec{.name = name};
    if (value.is_string()) {
      spec.role = parse_role(value.get<std::string>());
    } else if (value.is_object() && value.contains("role")) {
      spec.role = parse_role(value.at("role").get<std::string>());
      if (value.contains("kind")) {
        const auto kind = value.at("kind").get<std::string>();
        if (kind == "numeric") {
          spec.kind = ColumnKind::Numeric;
        } else if (kind == "categorical") {
          spec.kind = ColumnKind::Categorical;
        } else {
          fail(ErrorKind::MalformedInput, "unknown column kind '" + kind + "'");
        }
      }
    } else {
      fail(ErrorKind::MalformedInput, "bad schema entry for column '" + name + "'");
    }
    columns.push_back(std::move(spec));
  }
  return Schema(std::move(columns));
}

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "cannot open schema " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedInput, "schema " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

const ColumnSpec* Schema::find(std::string_view name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

void Schema::validate() const {
  int targets = 0, features = 0, sensitive = 0;
  for (const auto& c : columns_) {
    targets += c.role == ColumnRole::Target;
    features += c.role == ColumnRole::Feature;
    sensitive += c.role == ColumnRole::Sensitive;
  }
  if (targets != 1) {
    fail(ErrorKind::MalformedInput, "schema must have exactly one target column");
  }
  if (features < 1) {
    fail(ErrorKind::MalformedInput, "schema must have at least one feature column");
  }
  if (sensitive < 1) {
    fail(ErrorKind::MalformedInput, "schema must have at least one sensitive column");
  }
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<Column> columns,
                 std::vector<CategoricalEncoding> encodings,
                 std::vector<std::size_t> row_ids, std::size_t dropped_rows)
    : columns_(std::move(columns)),
      encodings_(std::move(encodings)),
      row_ids_(std::move(row_ids)),
      dropped_rows_(dropped_rows) {
  for (const auto& c : columns_) {
    if (c.values.size() != row_ids_.size()) {
      fail(ErrorKind::MalformedInput,
           "column '" + c.name + "' length does not match row count");
    }
  }
}

bool Dataset::has_column(std::string_view name) const {
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const Column& c) { return c.name == name; });
}

const Column& Dataset::column(std::string_view name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return c;
  }
  fail(ErrorKind::UnknownColumn, "no column named '" + std::string(name) + "'");
}

const Column& Dataset::target() const {
  for (const auto& c : columns_) {
    if (c.role == ColumnRole::Target) return c;
  }
  fail(ErrorKind::SchemaMismatch, "dataset has no target column");
}

const CategoricalEncoding* Dataset::encoding(std::string_view source) const {
  for (const auto& e : encodings_) {
    if (e.column == source) return &e;
  }
  return nullptr;
}

std::vector<std::string> Dataset::names(ColumnRole role) const {
  std::vector<std::string> out;
  for (const auto& c : columns_) {
    if (c.role == role) out.push_back(c.name);
  }
  return out;
}

Task Dataset::infer_task() const {
  const auto& y = target();
  if (y.kind == ColumnKind::Categorical) return Task::Classification;
  const bool binary = std::all_of(y.values.begin(), y.values.end(),
                                  [](double v) { return v == 0.0 || v == 1.0; });
  return binary ? Task::Classification : Task::Regression;
}

std::string Dataset::decode(std::string_view source, std::size_t row) const {
  const auto* enc = encoding(source);
  if (enc == nullptr) {
    fail(ErrorKind::UnknownColumn,
         "'" + std::string(source) + "' is not a categorical column");
  }
  if (enc->role == ColumnRole::Target) {
    return enc->levels.at(static_cast<std::size_t>(column(source).values.at(row)));
  }
  for (std::size_t l = 0; l < enc->levels.size(); ++l) {
    if (column(enc->dummy_names[l]).values.at(row) == 1.0) return enc->levels[l];
  }
  fail(ErrorKind::MalformedInput, "row has no active level for '" +
                                      std::string(source) + "'");
}

RowMatrix Dataset::matrix(std::span<const std::string> names) const {
  RowMatrix out(rows(), names.size());
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto& values = column(names[j]).values;
    for (std::size_t i = 0; i < rows(); ++i) out(i, j) = values[i];
  }
  return out;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<Column> columns = columns_;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    auto& dst = columns[j].values;
    dst.resize(rows.size());
    const auto& src = columns_[j].values;
    for (std::size_t i = 0; i < rows.size(); ++i) dst[i] = src.at(rows[i]);
  }
  std::vector<std::size_t> ids(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) ids[i] = row_ids_.at(rows[i]);
  return Dataset(std::move(columns), encodings_, std::move(ids), dropped_rows_);
}

Dataset Dataset::with_values(std::string_view name, std::vector<double> values) const {
  if (values.size() != rows()) {
    fail(ErrorKind::SchemaMismatch, "replacement column has wrong length");
  }
  std::vector<Column> columns = columns_;
  bool found = false;
  for (auto& c : columns) {
    if (c.name == name) {
      c.values = std::move(values);
      found = true;
      break;
    }
  }
  if (!found) {
    fail(ErrorKind::UnknownColumn, "no column named '" + std::string(name) + "'");
  }
  return Dataset(std::move(columns), encodings_, row_ids_, dropped_rows_);
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

bool is_missing(std::string_view raw) {
  const auto s = trim(raw);
  return s.empty() || s == "NA" || s == "N/A" || s == "NaN" || s == "nan" ||
         s == "?";
}

std::optional<double> parse_number(std::string_view raw) {
  const auto s = trim(raw);
  double value = 0.0;
  const char* first = s.data();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

Dataset encode(const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const Schema& schema, const LoadOptions& options) {
  schema.validate();
  for (const auto& spec : schema.columns()) {
    if (std::find(header.begin(), header.end(), spec.name) == header.end()) {
      fail(ErrorKind::UnknownColumn,
           "schema column '" + spec.name + "' is not in the header");
    }
  }

  // columns in use, in header order
  struct Used {
    std::size_t position;
    const ColumnSpec* spec;
  };
  std::vector<Used> used;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto* spec = schema.find(header[i]);
    if (spec != nullptr && spec->role != ColumnRole::Ignored) {
      used.push_back({i, spec});
    }
  }

  std::vector<std::size_t> kept;
  std::size_t dropped = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto missing = std::find_if(used.begin(), used.end(), [&](const Used& u) {
      return is_missing(row[u.position]);
    });
    if (missing == used.end()) {
      kept.push_back(r);
    } else if (options.drop_missing) {
      ++dropped;
    } else {
      fail(ErrorKind::MissingValue,
           "missing value in column '" + missing->spec->name + "' at data row " +
               std::to_string(r) + " (use drop-missing to skip such rows)");
    }
  }
  if (kept.empty()) {
    fail(ErrorKind::EmptyTable, "table has no usable data rows");
  }

  std::vector<Column> columns;
  std::vector<CategoricalEncoding> encodings;
  for (const auto& u : used) {
    const auto& name = u.spec->name;
    ColumnKind kind;
    if (u.spec->kind) {
      kind = *u.spec->kind;
    } else {
      const bool numeric = std::all_of(kept.begin(), kept.end(), [&](std::size_t r) {
        return parse_number(rows[r][u.position]).has_value();
      });
      kind = numeric ? ColumnKind::Numeric : ColumnKind::Categorical;
    }

    if (kind == ColumnKind::Numeric) {
      Column col{.name = name, .source = name, .role = u.spec->role, .kind = kind};
      col.values.reserve(kept.size());
      for (auto r : kept) {
        const auto v = parse_number(rows[r][u.position]);
        if (!v) {
          fail(ErrorKind::MalformedInput, "non-numeric value '" +
                                              rows[r][u.position] + "' in column '" +
                                              name + "' at data row " + std::to_string(r));
        }
        if (!std::isfinite(*v)) {
          fail(ErrorKind::MalformedInput, "non-finite value in column '" + name +
                                              "' at data row " + std::to_string(r));
        }
        col.values.push_back(*v);
      }
      columns.push_back(std::move(col));
      continue;
    }

    std::set<std::string> level_set;
    for (auto r : kept) level_set.emplace(trim(rows[r][u.position]));
    std::vector<std::string> levels(level_set.begin(), level_set.end());
    auto level_of = [&](std::size_t r) {
      const auto token = trim(rows[r][u.position]);
      return static_cast<std::size_t>(
          std::lower_bound(levels.begin(), levels.end(), token) - levels.begin());
    };

    CategoricalEncoding enc{.column = name, .role = u.spec->role, .levels = levels};
    if (u.spec->role == ColumnRole::Target) {
      if (levels.size() > 2) {
        fail(ErrorKind::TooManyLevels, "categorical target '" + name + "' has " +
                                           std::to_string(levels.size()) +
                                           " levels; only binary targets are supported");
      }
      if (levels.size() < 2) {
        fail(ErrorKind::MalformedInput,
             "categorical target '" + name + "' has a single level");
      }
      Column col{.name = name, .source = name, .role = u.spec->role, .kind = kind};
      col.values.reserve(kept.size());
      for (auto r : kept) col.values.push_back(static_cast<double>(level_of(r)));
      columns.push_back(std::move(col));
    } else {
      const auto first = columns.size();
      for (const auto& level : levels) {
        Column col{.name = name + "=" + level,
                   .source = name,
                   .role = u.spec->role,
                   .kind = kind,
                   .level = level,
                   .values = std::vector<double>(kept.size(), 0.0)};
        enc.dummy_names.push_back(col.name);
        columns.push_back(std::move(col));
      }
      for (std::size_t i = 0; i < kept.size(); ++i) {
        columns[first + level_of(kept[i])].values[i] = 1.0;
      }
    }
    encodings.push_back(std::move(enc));
  }

  return Dataset(std::move(columns), std::move(encodings), std::move(kept), dropped);
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema,
                 const LoadOptions& options) {
  const auto table = csv::read(path);
  return encode(table.header, table.rows, schema, options);
}

// ---------------------------------------------------------------------------
// Standardizer

Standardizer::Standardizer(std::vector<std::string> names, std::vector<double> means,
                           std::vector<double> sds)
    : names_(std::move(names)), means_(std::move(means)), sds_(std::move(sds)) {
  if (names_.size() != means_.size() || names_.size() != sds_.size()) {
    fail(ErrorKind::InvalidArgument, "standardizer parameter lengths differ");
  }
  for (std::size_t j = 0; j < sds_.size(); ++j) {
    if (!(sds_[j] > 0.0) || !std::isfinite(sds_[j]) || !std::isfinite(means_[j])) {
      fail(ErrorKind::InvalidArgument,
           "standardizer entry for '" + names_[j] + "' is not valid");
    }
  }
}

Standardizer Standardizer::fit(const Dataset& data, std::span<const std::string> columns) {
  std::vector<std::string> names(columns.begin(), columns.end());
  std::vector<double> means, sds;
  for (const auto& name : names) {
    const auto& col = data.column(name);
    if (col.is_dummy()) {
      means.push_back(0.0);
      sds.push_back(1.0);
      continue;
    }
    const auto& v = col.values;
    if (v.size() < 2) {
      fail(ErrorKind::EmptyTable, "need at least two rows to standardize '" + name + "'");
    }
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (*lo == *hi) {
      fail(ErrorKind::ConstantColumn, "column '" + name + "' is constant");
    }
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    means.push_back(mean);
    sds.push_back(std::sqrt(ss / (n - 1.0)));
  }
  return Standardizer(std::move(names), std::move(means), std::move(sds));
}

RowMatrix Standardizer::transform(const Dataset& data) const {
  return transform(data.matrix(names_));
}

RowMatrix Standardizer::transform(const RowMatrix& raw) const {
  if (raw.cols() != names_.size()) {
    fail(ErrorKind::SchemaMismatch, "column count does not match standardizer");
  }
  RowMatrix out(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    for (std::size_t j = 0; j < raw.cols(); ++j) out(i, j) = apply(j, raw(i, j));
  }
  return out;
}

RowMatrix Standardizer::inverse(const RowMatrix& standardized) const {
  if (standardized.cols() != names_.size()) {
    fail(ErrorKind::SchemaMismatch, "column count does not match standardizer");
  }
  RowMatrix out(standardized.rows(), standardized.cols());
  for (std::size_t i = 0; i < standardized.rows(); ++i) {
    for (std::size_t j = 0; j < standardized.cols(); ++j) {
      out(i, j) = invert(j, standardized(i, j));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

void SplitPlan::validate() const {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    fail(ErrorKind::InvalidArgument, "holdout fraction must lie in (0, 1)");
  }
  if (n_replicates < 1) {
    fail(ErrorKind::InvalidArgument, "at least one replicate is required");
  }
}

std::size_t holdout_size(std::size_t rows, double fraction) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows)));
}

SplitIndices split_indices(std::size_t rows, const SplitPlan& plan,
                           std::size_t replicate) {
  plan.validate();
  if (replicate >= plan.n_replicates) {
    fail(ErrorKind::InvalidArgument, "replicate " + std::to_string(replicate) +
                                         " is outside the plan's " +
                                         std::to_string(plan.n_replicates));
  }
  const auto h = holdout_size(rows, plan.holdout_fraction);
  if (h == 0 || h >= rows) {
    fail(ErrorKind::InvalidArgument,
         "holdout of " + std::to_string(h) + " rows out of " + std::to_string(rows) +
             " leaves an empty train or holdout set");
  }
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(plan.seed_for(replicate));
  std::shuffle(order.begin(), order.end(), rng);

  SplitIndices out;
  out.holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(h));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(h), order.end());
  std::sort(out.holdout.begin(), out.holdout.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitPlan& plan,
                                  std::size_t replicate) {
  const auto idx = split_indices(data.rows(), plan, replicate);
  return {data.select_rows(idx.train), data.select_rows(idx.holdout)};
}

nlohmann::json describe(const Dataset& data) {
  nlohmann::json out;
  out["rows"] = data.rows();
  out["dropped_rows"] = data.dropped_rows();
  out["task"] = to_string(data.infer_task());
  auto& columns = out["columns"] = nlohmann::json::array();
  for (const auto& c : data.columns()) {
    nlohmann::json entry{{"name", c.name},
                         {"source", c.source},
                         {"role", to_string(c.role)},
                         {"kind", to_string(c.kind)}};
    if (!c.level.empty()) entry["level"] = c.level;
    columns.push_back(std::move(entry));
  }
  auto& encodings = out["encodings"] = nlohmann::json::array();
  for (const auto& e : data.encodings()) {
    encodings.push_back({{"column", e.column},
                         {"role", to_string(e.role)},
                         {"levels", e.levels},
                         {"dummies", e.dummy_names}});
  }
  return out;
}

}  // namespace tdb
