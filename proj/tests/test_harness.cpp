#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "support.hpp"
#include "towerdebias/csv.hpp"
#include "towerdebias/debias.hpp"
#include "towerdebias/error.hpp"
#include "towerdebias/harness.hpp"
#include "towerdebias/models.hpp"
#include "towerdebias/theory.hpp"

using namespace tdb;

namespace {

const std::filesystem::path kSynthetic = TDB_SOURCE_DIR "/data/synthetic";

ExperimentConfig base_config() {
  ExperimentConfig c;
  c.base_dir = kSynthetic;
  c.data = "data.csv";
  c.schema = "schema.json";
  c.split.n_replicates = 4;
  c.threads = 1;
  return c;
}

Dataset synthetic() {
  return load_csv(kSynthetic / "data.csv", Schema::load(kSynthetic / "schema.json"));
}

// y thresholded at its median, so the target is binary.
Dataset binary_synthetic() {
  auto d = synthetic();
  auto y = d.target().values;
  auto sorted = y;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  for (auto& v : y) v = v > median ? 1.0 : 0.0;
  return d.with_values("y", y);
}

}  // namespace

TEST_CASE("config validation") {
  auto c = base_config();
  CHECK_NOTHROW(c.validate());
  c.k_grid = {};
  CHECK_THROWS_AS(c.validate(), Error);
  c.k_grid = {5, 3};
  CHECK_THROWS_AS(c.validate(), Error);
  c.k_grid = {0, 3};
  CHECK_THROWS_AS(c.validate(), Error);
  c = base_config();
  c.split.n_replicates = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = base_config();
  c.model = ModelKind::External;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("config from JSON resolves paths against its directory") {
  const auto doc = nlohmann::json::parse(
      R"({"data":"d.csv","schema":"/abs/s.json","model":"knn","task":"classification",
          "k_grid":[2,4],"replicates":3,"seed":9,"fit":{"knn":4},"clamp_k":false})");
  const auto c = ExperimentConfig::from_json(doc, "/base");
  CHECK(c.resolve(c.data) == std::filesystem::path("/base/d.csv"));
  CHECK(c.resolve(c.schema) == std::filesystem::path("/abs/s.json"));
  CHECK(c.model == ModelKind::Knn);
  CHECK(c.task == Task::Classification);
  CHECK(c.k_grid == std::vector<std::size_t>{2, 4});
  CHECK(c.split.n_replicates == 3);
  CHECK(c.split.base_seed == 9);
  CHECK(c.fit.knn == 4);
  CHECK_FALSE(c.clamp_k);
  CHECK(c.to_json().at("schema") == "/abs/s.json");

  const auto defaults = ExperimentConfig::from_json(
      nlohmann::json::parse(R"({"data":"d.csv","schema":"s.json"})"));
  CHECK(defaults.k_grid == default_k_grid());
  CHECK(defaults.split.n_replicates == 25);
  CHECK(defaults.split.holdout_fraction == 0.2);
  CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"data":"d.csv"})")),
                  Error);
}

TEST_CASE("k = n_train gives undefined correlations and the constant-mean error") {
  const auto data = synthetic();
  auto c = base_config();
  const auto n_train = data.rows() - holdout_size(data.rows(), c.split.holdout_fraction);
  c.k_grid = {n_train};
  const auto r = run_experiment(c, data);
  for (const auto& rep : r.replicates) {
    const auto idx = split_indices(data.rows(), c.split, rep.replicate);
    const auto train = data.select_rows(idx.train);
    const auto holdout = data.select_rows(idx.holdout);
    const auto train_pred = fit_linear(train, c.fit)->predict(train);
    std::vector<std::size_t> all(train.rows());
    std::iota(all.begin(), all.end(), 0);
    const double constant = oracle::average_at(all, train_pred);
    const auto& report = rep.reports.at(0);
    REQUIRE(report.correlations.size() == 1);
    CHECK_FALSE(report.correlations[0].debiased.defined());
    CHECK(report.utility.debiased ==
          doctest::Approx(oracle::mean_abs_error(holdout.target().values,
                                                 std::vector<double>(holdout.rows(), constant)))
              .epsilon(1e-12));
  }
  const auto s = r.find(n_train, "s", "debiased_correlation");
  CHECK(s.n == 0);
  CHECK_FALSE(s.mean.has_value());
}

TEST_CASE("strong sensitive effect: k = 25 halves the mean |rho|") {
  theory::GaussianSpec spec;
  spec.p = 1;
  spec.mean = {0, 0, 0};
  // y = x + 1.5 s + noise, x independent of s
  spec.covariance = RowMatrix(3, 3, {1, 0, 1, 0, 1, 1.5, 1, 1.5, 1 + 2.25 + 1});
  const auto data = theory::sample(spec, 3000, 17);
  auto c = base_config();
  c.k_grid = {1, 25, 100};
  c.split.n_replicates = 10;
  const auto r = run_experiment(c, data);
  const double base = *r.find(25, "s", "baseline_abs_correlation").mean;
  const double deb = *r.find(25, "s", "debiased_abs_correlation").mean;
  CHECK(deb < 0.5 * base);

  // largest k is no worse than k = 1, with three standard errors of slack
  const auto k1 = r.find(1, "s", "debiased_abs_correlation");
  const auto kmax = r.find(100, "s", "debiased_abs_correlation");
  const double se = std::hypot(*k1.sd, *kmax.sd) / std::sqrt(static_cast<double>(k1.n));
  CHECK(*kmax.mean <= *k1.mean + 3 * se);
}

TEST_CASE("aggregates equal hand averages of the long rows") {
  auto c = base_config();
  c.k_grid = {3, 10};
  const auto r = run_experiment(c);
  std::map<std::tuple<std::size_t, std::string, std::string>, std::vector<double>> groups;
  for (const auto& row : r.rows()) {
    if (row.value) groups[{row.k, row.sensitive_level, row.metric}].push_back(*row.value);
  }
  for (const auto& s : r.summary()) {
    const auto& v = groups[{s.k, s.sensitive_level, s.metric}];
    REQUIRE(v.size() == s.n);
    CHECK(std::abs(*s.mean - oracle::mean(v)) <= 1e-12 * std::max(1.0, std::abs(oracle::mean(v))));
    CHECK(std::abs(*s.sd - oracle::sd(v)) <= 1e-12 * std::max(1.0, oracle::sd(v)));
  }
  for (const auto& rep : r.replicates) {
    for (const auto& rpt : rep.reports) {
      const auto& corr = rpt.correlations[0];
      CHECK(*corr.reduction() ==
            std::abs(*corr.baseline.value) - std::abs(*corr.debiased.value));
    }
  }
}

TEST_CASE("export: cardinality, determinism and summary consistency") {
  auto c = base_config();
  c.k_grid = {5, 20};
  c.split.n_replicates = 2;
  const auto r = run_experiment(c);
  test::TempDir a("export-a"), b("export-b");
  export_results(r, a.path());
  export_results(r, b.path());
  for (const char* f : {"sweep.csv", "summary.csv", "report.json"}) {
    CHECK(test::read_file(a / f) == test::read_file(b / f));
  }

  const auto sweep = csv::read(a / "sweep.csv");
  CHECK(sweep.header ==
        std::vector<std::string>{"k", "replicate", "sensitive_level", "metric", "value"});
  // per (k, replicate): five correlation metrics for s plus two utility rows
  CHECK(sweep.rows.size() == 2 * 2 * (5 + 2));

  const auto summary = csv::read(a / "summary.csv");
  for (const auto& row : summary.rows) {
    std::vector<double> values;
    for (const auto& s : sweep.rows) {
      if (s[0] == row[0] && s[2] == row[1] && s[3] == row[2] && s[4] != "NA") {
        values.push_back(std::stod(s[4]));
      }
    }
    CHECK(std::stod(row[3]) == doctest::Approx(oracle::mean(values)).epsilon(1e-12));
  }

  const auto report = nlohmann::json::parse(test::read_file(a / "report.json"));
  CHECK(report.at("replicates").size() == 2);
  CHECK(report.at("config").at("k_grid") == nlohmann::json({5, 20}));
  CHECK_THROWS_AS(export_results(SweepResult{}, a.path()), Error);
}

TEST_CASE("identical configs give identical report bytes regardless of threads") {
  auto c = base_config();
  c.k_grid = {1, 7, 25};
  c.split.n_replicates = 6;
  const auto one = run_experiment(c).to_json().dump(2);
  c.threads = 4;
  const auto four = run_experiment(c).to_json().dump(2);
  CHECK(one == four);
  CHECK(run_experiment(c).to_json().dump(2) == one);
}

TEST_CASE("classification with logistic and knn baselines") {
  const auto data = binary_synthetic();
  CHECK(data.infer_task() == Task::Classification);
  for (auto kind : {ModelKind::Logistic, ModelKind::Knn}) {
    auto c = base_config();
    c.model = kind;
    c.k_grid = {5, 25};
    const auto r = run_experiment(c, data);
    CHECK(r.task == Task::Classification);
    for (const auto& rep : r.replicates) {
      for (const auto& rpt : rep.reports) {
        CHECK(rpt.utility.metric == "misclassification_rate");
        CHECK(rpt.utility.debiased >= 0.0);
        CHECK(rpt.utility.debiased <= 1.0);
      }
    }
  }
  auto c = base_config();
  c.model = ModelKind::Linear;
  CHECK_THROWS_AS(run_experiment(c, data), Error);
}

TEST_CASE("external predictions feed the sweep; missing ids carry context") {
  const auto data = synthetic();
  const auto model = fit_linear(data, FitConfig{});
  test::TempDir dir("ext-harness");
  write_predictions(dir / "p.csv", data.row_ids(), model->predict(data));
  auto c = base_config();
  c.model = ModelKind::External;
  c.predictions = dir / "p.csv";
  c.k_grid = {10};
  const auto r = run_experiment(c, data);
  CHECK(r.replicates.size() == 4);

  std::vector<std::size_t> some(data.rows() / 2);
  std::iota(some.begin(), some.end(), 0);
  const auto preds = model->predict(data);
  write_predictions(dir / "partial.csv", some,
                    std::span<const double>(preds.data(), some.size()));
  c.predictions = dir / "partial.csv";
  try {
    run_experiment(c, data);
    FAIL("expected UnknownId");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownId);
    CHECK(std::string(e.what()).find("replicate") != std::string::npos);
  }
}

TEST_CASE("holdout rows never join the index") {
  const auto data = synthetic();
  const SplitPlan plan{.holdout_fraction = 0.2, .n_replicates = 3, .base_seed = 1};
  for (std::size_t r = 0; r < 3; ++r) {
    const auto idx = split_indices(data.rows(), plan, r);
    const auto train = data.select_rows(idx.train);
    const auto holdout = data.select_rows(idx.holdout);
    const auto index = DebiasIndex::build(train, fit_linear(train, FitConfig{})->predict(train));
    std::set<std::size_t> ref(index.reference_row_ids().begin(), index.reference_row_ids().end());
    CHECK(ref.size() == train.rows());
    for (auto id : holdout.row_ids()) CHECK_FALSE(ref.contains(id));
  }
}
