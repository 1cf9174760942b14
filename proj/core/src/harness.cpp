#include "towerdebias/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <tuple>

#include "parallel.hpp"
#include "towerdebias/csv.hpp"
#include "towerdebias/debias.hpp"
#include "towerdebias/error.hpp"

namespace tdb {

std::vector<std::size_t> default_k_grid() { return {1, 2, 5, 7, 10, 15, 20, 25, 30, 40, 50}; }

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (data.empty()) fail(ErrorKind::InvalidArgument, "experiment needs a data path");
  if (schema.empty()) fail(ErrorKind::InvalidArgument, "experiment needs a schema path");
  if (model == ModelKind::External && predictions.empty()) {
    fail(ErrorKind::InvalidArgument, "external model needs a predictions path");
  }
  if (k_grid.empty()) fail(ErrorKind::InvalidArgument, "k_grid must not be empty");
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    if (k_grid[i] < 1) fail(ErrorKind::InvalidArgument, "k must be >= 1");
    if (i > 0 && k_grid[i] <= k_grid[i - 1]) {
      fail(ErrorKind::InvalidArgument, "k_grid must be strictly ascending");
    }
  }
  split.validate();
  fit.validate();
  if (!(threshold > 0.0 && threshold < 1.0)) {
    fail(ErrorKind::InvalidArgument, "threshold must lie in (0, 1)");
  }
}

std::filesystem::path ExperimentConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc,
                                             const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    c.data = doc.at("data").get<std::string>();
    c.schema = doc.at("schema").get<std::string>();
    if (doc.contains("model")) c.model = parse_model_kind(doc.at("model").get<std::string>());
    if (doc.contains("predictions")) c.predictions = doc.at("predictions").get<std::string>();
    if (doc.contains("task")) {
      const auto task = doc.at("task").get<std::string>();
      if (task != "auto") c.task = parse_task(task);
    }
    if (doc.contains("k_grid")) c.k_grid = doc.at("k_grid").get<std::vector<std::size_t>>();
    if (doc.contains("holdout_fraction")) {
      c.split.holdout_fraction = doc.at("holdout_fraction").get<double>();
    }
    if (doc.contains("replicates")) c.split.n_replicates = doc.at("replicates").get<std::size_t>();
    if (doc.contains("seed")) c.split.base_seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("threshold")) c.threshold = doc.at("threshold").get<double>();
    if (doc.contains("fit")) {
      const auto& f = doc.at("fit");
      c.fit.ridge_epsilon = f.value("ridge_epsilon", c.fit.ridge_epsilon);
      c.fit.max_iterations = f.value("max_iterations", c.fit.max_iterations);
      c.fit.tolerance = f.value("tolerance", c.fit.tolerance);
      c.fit.knn = f.value("knn", c.fit.knn);
    }
    c.drop_missing = doc.value("drop_missing", false);
    c.clamp_k = doc.value("clamp_k", true);
    if (doc.contains("output_dir")) c.output_dir = doc.at("output_dir").get<std::string>();
    c.threads = doc.value("threads", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("bad experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "cannot open config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedInput, "config " + path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path());
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json out{{"data", data.generic_string()},
                     {"schema", schema.generic_string()},
                     {"model", to_string(model)},
                     {"task", task ? std::string(to_string(*task)) : std::string("auto")},
                     {"k_grid", k_grid},
                     {"holdout_fraction", split.holdout_fraction},
                     {"replicates", split.n_replicates},
                     {"seed", split.base_seed},
                     {"threshold", threshold},
                     {"fit",
                      {{"ridge_epsilon", fit.ridge_epsilon},
                       {"max_iterations", fit.max_iterations},
                       {"tolerance", fit.tolerance},
                       {"knn", fit.knn}}},
                     {"drop_missing", drop_missing},
                     {"clamp_k", clamp_k}};
  if (model == ModelKind::External) out["predictions"] = predictions.generic_string();
  return out;
}

// ---------------------------------------------------------------------------
// Running

namespace {

void check_model_task(ModelKind model, Task task) {
  if (model == ModelKind::Linear && task == Task::Classification) {
    fail(ErrorKind::InvalidArgument,
         "linear regression does not produce probabilities; use logistic, knn or "
         "external for classification");
  }
  if (model == ModelKind::Logistic && task == Task::Regression) {
    fail(ErrorKind::InvalidArgument, "logistic regression needs a binary target");
  }
}

std::string context(std::size_t replicate, std::optional<std::size_t> k) {
  std::string out = "replicate " + std::to_string(replicate);
  if (k) out += ", k = " + std::to_string(*k);
  return out;
}

}  // namespace

SweepResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto schema = Schema::load(config.resolve(config.schema));
  const auto data = load_csv(config.resolve(config.data), schema,
                             LoadOptions{.drop_missing = config.drop_missing});
  return run_experiment(config, data);
}

SweepResult run_experiment(const ExperimentConfig& config, const Dataset& data) {
  config.validate();
  SweepResult result;
  result.config = config;
  result.task = config.task.value_or(data.infer_task());
  check_model_task(config.model, result.task);

  std::unique_ptr<Predictor> external;
  if (config.model == ModelKind::External) {
    external = load_external_predictions(config.resolve(config.predictions), result.task);
  }

  result.replicates.resize(config.split.n_replicates);
  detail::parallel_for(config.split.n_replicates, config.threads, [&](std::size_t r) {
    ReplicateResult& rep = result.replicates[r];
    std::optional<std::size_t> current_k;
    try {
      rep.replicate = r;
      rep.seed = config.split.seed_for(r);
      const auto idx = split_indices(data.rows(), config.split, r);
      const auto train = data.select_rows(idx.train);
      const auto holdout = data.select_rows(idx.holdout);
      rep.n_train = train.rows();
      rep.n_holdout = holdout.rows();

      std::unique_ptr<Predictor> fitted;
      const Predictor* model = external.get();
      if (model == nullptr) {
        fitted = config.model == ModelKind::Knn
                     ? fit_knn_predictor(train, config.fit, result.task)
                     : fit_model(config.model, train, config.fit);
        model = fitted.get();
        rep.diagnostics = model->diagnostics();
        rep.warnings = rep.diagnostics.warnings;
      }
      const auto train_pred = model->predict(train);
      const auto holdout_pred = model->predict(holdout);

      const auto index = DebiasIndex::build(train, train_pred);
      const std::set<std::size_t> reference(index.reference_row_ids().begin(),
                                            index.reference_row_ids().end());
      for (auto id : holdout.row_ids()) {
        if (reference.contains(id)) {
          fail(ErrorKind::InvalidArgument,
               "holdout row " + std::to_string(id) + " leaked into the debias index");
        }
      }

      for (auto k : config.k_grid) {
        current_k = k;
        const auto debiased =
            index.predict(holdout, DebiasConfig{.k = k, .clamp = config.clamp_k});
        rep.warnings.insert(rep.warnings.end(), debiased.warnings.begin(),
                            debiased.warnings.end());
        rep.reports.push_back(fairness_report(holdout, holdout_pred, debiased.values, k,
                                              result.task, config.threshold));
      }
    } catch (const Error& e) {
      throw Error(e.kind(), context(r, current_k) + ": " + e.what());
    }
  });
  return result;
}

// ---------------------------------------------------------------------------
// Results

std::vector<MetricRow> SweepResult::rows() const {
  std::vector<MetricRow> out;
  for (std::size_t ki = 0; ki < config.k_grid.size(); ++ki) {
    for (const auto& rep : replicates) {
      const auto& report = rep.reports.at(ki);
      const auto k = report.k;
      for (const auto& c : report.correlations) {
        auto abs_of = [](const Correlation& x) -> std::optional<double> {
          if (!x.defined()) return std::nullopt;
          return std::abs(*x.value);
        };
        out.push_back({k, rep.replicate, c.name, "baseline_correlation", c.baseline.value});
        out.push_back({k, rep.replicate, c.name, "debiased_correlation", c.debiased.value});
        out.push_back({k, rep.replicate, c.name, "baseline_abs_correlation", abs_of(c.baseline)});
        out.push_back({k, rep.replicate, c.name, "debiased_abs_correlation", abs_of(c.debiased)});
        out.push_back({k, rep.replicate, c.name, "reduction", c.reduction()});
      }
      out.push_back({k, rep.replicate, "", "baseline_" + report.utility.metric,
                     report.utility.baseline});
      out.push_back({k, rep.replicate, "", "debiased_" + report.utility.metric,
                     report.utility.debiased});
    }
  }
  return out;
}

std::vector<MetricSummary> SweepResult::summary() const {
  // Keyed by first appearance so output order follows rows().
  std::vector<MetricSummary> out;
  std::map<std::tuple<std::size_t, std::string, std::string>, std::vector<double>> values;
  for (const auto& row : rows()) {
    const auto key = std::make_tuple(row.k, row.sensitive_level, row.metric);
    auto [it, inserted] = values.try_emplace(key);
    if (inserted) out.push_back({row.k, row.sensitive_level, row.metric, {}, {}, 0});
    if (row.value) it->second.push_back(*row.value);
  }
  for (auto& s : out) {
    const auto& v = values[std::make_tuple(s.k, s.sensitive_level, s.metric)];
    s.n = v.size();
    if (v.empty()) continue;
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    s.mean = mean;
    if (v.size() >= 2) {
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
  }
  return out;
}

MetricSummary SweepResult::find(std::size_t k, const std::string& level,
                                const std::string& metric) const {
  for (auto& s : summary()) {
    if (s.k == k && s.sensitive_level == level && s.metric == metric) return s;
  }
  fail(ErrorKind::InvalidArgument, "no summary entry for k = " + std::to_string(k) +
                                       ", level '" + level + "', metric '" + metric + "'");
}

namespace {
nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
}  // namespace

nlohmann::json SweepResult::to_json() const {
  auto reps = nlohmann::json::array();
  for (const auto& rep : replicates) {
    auto reports = nlohmann::json::array();
    for (const auto& r : rep.reports) reports.push_back(r.to_json());
    reps.push_back({{"replicate", rep.replicate},
                    {"seed", rep.seed},
                    {"n_train", rep.n_train},
                    {"n_holdout", rep.n_holdout},
                    {"diagnostics", rep.diagnostics.to_json()},
                    {"warnings", rep.warnings},
                    {"reports", std::move(reports)}});
  }
  auto summary_json = nlohmann::json::array();
  for (const auto& s : summary()) {
    summary_json.push_back({{"k", s.k},
                            {"sensitive_level", s.sensitive_level},
                            {"metric", s.metric},
                            {"mean", opt(s.mean)},
                            {"sd", opt(s.sd)},
                            {"n", s.n}});
  }
  return {{"config", config.to_json()},
          {"task", to_string(task)},
          {"summary", std::move(summary_json)},
          {"replicates", std::move(reps)}};
}

void export_results(const SweepResult& result, const std::filesystem::path& dir) {
  if (result.replicates.empty()) fail(ErrorKind::InvalidArgument, "empty sweep result");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + (dir / name).string());
    return out;
  };
  auto value = [](const std::optional<double>& v) {
    return v ? csv::format_double(*v) : std::string("NA");
  };

  {
    auto out = open("sweep.csv");
    out << "k,replicate,sensitive_level,metric,value\n";
    for (const auto& r : result.rows()) {
      out << r.k << ',' << r.replicate << ',' << csv::escape(r.sensitive_level) << ','
          << r.metric << ',' << value(r.value) << '\n';
    }
  }
  {
    auto out = open("summary.csv");
    out << "k,sensitive_level,metric,mean,sd,n\n";
    for (const auto& s : result.summary()) {
      out << s.k << ',' << csv::escape(s.sensitive_level) << ',' << s.metric << ','
          << value(s.mean) << ',' << value(s.sd) << ',' << s.n << '\n';
    }
  }
  {
    auto out = open("report.json");
    out << result.to_json().dump(2) << '\n';
    if (!out) fail(ErrorKind::Io, "failed writing report.json");
  }
}

}  // namespace tdb
