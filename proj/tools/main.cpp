#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "towerdebias/csv.hpp"
#include "towerdebias/data.hpp"
#include "towerdebias/debias.hpp"
#include "towerdebias/error.hpp"
#include "towerdebias/harness.hpp"
#include "towerdebias/models.hpp"
#include "towerdebias/theory.hpp"

namespace fs = std::filesystem;

namespace {

struct DataArgs {
  std::string data;
  std::string schema;
  bool drop_missing = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--data", data, "CSV file")->required();
    cmd->add_option("--schema", schema, "JSON column roles")->required();
    cmd->add_flag("--drop-missing", drop_missing, "Drop rows with missing values");
  }

  tdb::Dataset load() const {
    return tdb::load_csv(data, tdb::Schema::load(schema),
                         tdb::LoadOptions{.drop_missing = drop_missing});
  }
};

std::optional<tdb::Task> task_option(const std::string& text) {
  if (text == "auto") return std::nullopt;
  return tdb::parse_task(text);
}

const CLI::Validator kAtLeastOne(
    [](std::string& value) -> std::string {
      long long k = 0;
      try {
        k = std::stoll(value);
      } catch (const std::exception&) {
        return "k must be an integer >= 1";
      }
      return k >= 1 ? std::string() : "k must be >= 1 (got " + value + ")";
    },
    "k >= 1");

void write_json(const nlohmann::json& doc, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream file(out);
  if (!file) tdb::fail(tdb::ErrorKind::Io, "cannot write " + out);
  file << doc.dump(2) << '\n';
}

void write_dataset(const tdb::Dataset& data, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) tdb::fail(tdb::ErrorKind::Io, "cannot write " + path.string());
  const auto& cols = data.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out << (j ? "," : "") << tdb::csv::escape(cols[j].name);
  }
  out << '\n';
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out << (j ? "," : "") << tdb::csv::format_double(cols[j].values[i]);
    }
    out << '\n';
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Remove the influence of sensitive attributes from predictions",
               "tdb"};
  app.set_version_flag("--version", std::string(TDB_VERSION_STRING));
  app.require_subcommand(1);

  // ingest-check
  DataArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest-check", "Load and encode a dataset, print a summary");
  ingest.add(ingest_cmd);
  ingest_cmd->callback([&] { write_json(tdb::describe(ingest.load()), "-"); });

  // fit
  DataArgs fit_data;
  std::string fit_model_name = "linear", fit_task = "auto", fit_out;
  tdb::FitConfig fit_cfg;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a baseline model and export it as JSON");
  fit_data.add(fit_cmd);
  fit_cmd->add_option("--model", fit_model_name, "linear, logistic or knn")
      ->check(CLI::IsMember({"linear", "logistic", "knn"}));
  fit_cmd->add_option("--task", fit_task, "auto, regression or classification")
      ->check(CLI::IsMember({"auto", "regression", "classification"}));
  fit_cmd->add_option("--knn", fit_cfg.knn, "Neighbors of the knn model")->check(kAtLeastOne);
  fit_cmd->add_option("--ridge", fit_cfg.ridge_epsilon, "Ridge added to the normal equations")
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--max-iterations", fit_cfg.max_iterations, "Logistic iteration cap");
  fit_cmd->add_option("--out", fit_out, "Model JSON (stdout when omitted)");
  fit_cmd->callback([&] {
    const auto data = fit_data.load();
    const auto kind = tdb::parse_model_kind(fit_model_name);
    const auto task = task_option(fit_task).value_or(data.infer_task());
    const auto model = kind == tdb::ModelKind::Knn ? tdb::fit_knn_predictor(data, fit_cfg, task)
                                                   : tdb::fit_model(kind, data, fit_cfg);
    for (const auto& w : model->diagnostics().warnings) std::cerr << "warning: " << w << '\n';
    write_json(model->to_json(), fit_out);
  });

  // predict
  DataArgs predict_data;
  std::string predict_model, predict_out;
  auto* predict_cmd = app.add_subcommand("predict", "Apply an exported model to a dataset");
  predict_data.add(predict_cmd);
  predict_cmd->add_option("--model", predict_model, "Model JSON from fit")
      ->required()
      ;
  predict_cmd->add_option("--out", predict_out, "CSV id,prediction")->required();
  predict_cmd->callback([&] {
    const auto data = predict_data.load();
    const auto model = tdb::load_model(predict_model);
    tdb::write_predictions(predict_out, data.row_ids(), model->predict(data));
  });

  // debias
  DataArgs debias_data;
  std::string debias_predictions, debias_model, debias_out, debias_query, debias_task = "auto";
  std::size_t debias_k = 25;
  bool no_clamp = false;
  auto* debias_cmd =
      app.add_subcommand("debias", "Average reference predictions over the k nearest feature rows");
  debias_data.add(debias_cmd);
  auto* preds_opt = debias_cmd->add_option("--predictions", debias_predictions,
                                           "CSV id,prediction for the reference rows")
                        ;
  auto* model_opt = debias_cmd->add_option("--model", debias_model, "Model JSON from fit")
                        ;
  preds_opt->excludes(model_opt);
  debias_cmd->add_option("--k", debias_k, "Neighbors to average")->check(kAtLeastOne);
  debias_cmd->add_option("--query", debias_query, "CSV of rows to debias (default: --data)")
      ;
  debias_cmd->add_option("--task", debias_task, "auto, regression or classification")
      ->check(CLI::IsMember({"auto", "regression", "classification"}));
  debias_cmd->add_flag("--no-clamp", no_clamp, "Fail instead of clamping k to the reference size");
  debias_cmd->add_option("--out", debias_out, "CSV id,debiased_prediction")->required();
  debias_cmd->callback([&] {
    if (debias_predictions.empty() == debias_model.empty()) {
      throw CLI::ValidationError("debias", "exactly one of --predictions or --model is required");
    }
    const auto reference = debias_data.load();
    std::unique_ptr<tdb::Predictor> source;
    if (!debias_model.empty()) {
      source = tdb::load_model(debias_model);
    } else {
      const auto task = task_option(debias_task).value_or(reference.infer_task());
      source = tdb::load_external_predictions(debias_predictions, task);
    }
    const auto index = tdb::DebiasIndex::build(reference, source->predict(reference));
    const auto queries =
        debias_query.empty()
            ? reference
            : tdb::load_csv(debias_query, tdb::Schema::load(debias_data.schema),
                            tdb::LoadOptions{.drop_missing = debias_data.drop_missing});
    const auto result = index.predict(queries, {.k = debias_k, .clamp = !no_clamp});
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    tdb::write_predictions(debias_out, queries.row_ids(), result.values, "debiased_prediction");
  });

  // evaluate
  std::string eval_config, eval_out;
  std::optional<std::size_t> eval_threads;
  auto* eval_cmd = app.add_subcommand("evaluate", "Run a repeated-holdout k sweep");
  eval_cmd->add_option("--config", eval_config, "Experiment JSON")
      ->required()
      ;
  eval_cmd->add_option("--out-dir", eval_out, "Output directory (overrides the config)");
  eval_cmd->add_option("--threads", eval_threads, "Worker threads (default: all cores)");
  eval_cmd->callback([&] {
    auto config = tdb::ExperimentConfig::load(eval_config);
    if (eval_threads) config.threads = *eval_threads;
    fs::path out = eval_out.empty() ? config.resolve(config.output_dir) : fs::path(eval_out);
    if (out.empty()) {
      throw CLI::ValidationError("evaluate", "no output directory: set output_dir or --out-dir");
    }
    const auto result = tdb::run_experiment(config);
    tdb::export_results(result, out);
    std::cerr << "wrote " << (out / "report.json").string() << '\n';
  });

  // theory-check
  tdb::theory::SuiteConfig suite;
  auto* theory_cmd =
      app.add_subcommand("theory-check", "Monte Carlo checks on random Gaussian models");
  theory_cmd->add_option("--trials", suite.trials, "Random specs")->check(CLI::PositiveNumber);
  theory_cmd->add_option("--n", suite.n, "Sample size per trial")->check(CLI::Range(10, 100000000));
  theory_cmd->add_option("--seed", suite.seed, "Base seed");
  theory_cmd->add_option("--p", suite.p, "Number of non-sensitive features");
  theory_cmd->add_option("--k", suite.k, "Debias neighbors")->check(kAtLeastOne);
  theory_cmd->add_option("--threads", suite.threads, "Worker threads (default: all cores)");
  theory_cmd->callback([&] { write_json(tdb::theory::run_suite(suite), "-"); });

  // synth
  std::string synth_spec, synth_dir;
  std::size_t synth_n = 1000;
  std::uint64_t synth_seed = 1;
  auto* synth_cmd = app.add_subcommand("synth", "Sample a Gaussian spec into data.csv and schema.json");
  synth_cmd->add_option("--spec", synth_spec, "Gaussian spec JSON")
      ->required()
      ;
  synth_cmd->add_option("--n", synth_n, "Rows")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_seed, "Sampling seed");
  synth_cmd->add_option("--out-dir", synth_dir, "Output directory")->required();
  synth_cmd->callback([&] {
    std::ifstream in(synth_spec);
    if (!in) tdb::fail(tdb::ErrorKind::MissingFile, "cannot open spec " + synth_spec);
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      tdb::fail(tdb::ErrorKind::MalformedInput, synth_spec + ": " + e.what());
    }
    const auto data = tdb::theory::sample(tdb::theory::GaussianSpec::from_json(doc), synth_n,
                                          synth_seed);
    fs::create_directories(synth_dir);
    write_dataset(data, fs::path(synth_dir) / "data.csv");
    nlohmann::json schema = nlohmann::json::object();
    for (const auto& c : data.columns()) schema[c.name] = std::string(tdb::to_string(c.role));
    write_json(schema, (fs::path(synth_dir) / "schema.json").string());
  });

  if (argc <= 1) {
    std::cerr << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const tdb::Error& e) {
    std::cerr << "error (" << tdb::to_string(e.kind()) << "): " << e.what() << '\n';
    return tdb::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
