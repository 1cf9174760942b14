#include "towerdebias/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "linalg.hpp"
#include "towerdebias/csv.hpp"
#include "towerdebias/error.hpp"

namespace tdb {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::Logistic: return "logistic";
    case ModelKind::Knn: return "knn";
    case ModelKind::External: return "external";
  }
  return "external";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "linear") return ModelKind::Linear;
  if (text == "logistic") return ModelKind::Logistic;
  if (text == "knn") return ModelKind::Knn;
  if (text == "external") return ModelKind::External;
  fail(ErrorKind::InvalidArgument, "unknown model kind '" + std::string(text) + "'");
}

void FitConfig::validate() const {
  if (!(ridge_epsilon >= 0.0)) {
    fail(ErrorKind::InvalidArgument, "ridge_epsilon must be >= 0");
  }
  if (max_iterations < 1) {
    fail(ErrorKind::InvalidArgument, "max_iterations must be >= 1");
  }
  if (!(tolerance > 0.0)) fail(ErrorKind::InvalidArgument, "tolerance must be > 0");
  if (knn < 1) fail(ErrorKind::InvalidArgument, "knn neighbor count must be >= 1");
}

nlohmann::json FitDiagnostics::to_json() const {
  return {{"converged", converged},
          {"iterations", iterations},
          {"log_likelihood", log_likelihood},
          {"warnings", warnings}};
}

// ---------------------------------------------------------------------------
// Design matrices

std::vector<std::string> design_columns(const Dataset& data) {
  std::vector<std::string> out;
  for (auto role : {ColumnRole::Feature, ColumnRole::Sensitive}) {
    for (const auto& c : data.columns()) {
      if (c.role != role) continue;
      if (c.is_dummy()) {
        const auto* enc = data.encoding(c.source);
        if (enc != nullptr && enc->levels.front() == c.level) continue;
      }
      out.push_back(c.name);
    }
  }
  return out;
}

RowMatrix design_matrix(const Dataset& data, std::span<const std::string> columns) {
  std::vector<const std::vector<double>*> sources;
  for (const auto& name : columns) {
    if (!data.has_column(name)) {
      fail(ErrorKind::SchemaMismatch, "rows lack model column '" + name + "'");
    }
    sources.push_back(&data.column(name).values);
  }
  RowMatrix out(data.rows(), columns.size() + 1);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    out(i, 0) = 1.0;
    for (std::size_t j = 0; j < sources.size(); ++j) out(i, j + 1) = (*sources[j])[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Logistic helpers

namespace logistic {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace {
// log(1 + exp(t)) without overflow
double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}
}  // namespace

double log_likelihood(const RowMatrix& design, std::span<const double> y,
                      std::span<const double> beta) {
  double ll = 0.0;
  for (std::size_t i = 0; i < design.rows(); ++i) {
    const auto row = design.row(i);
    const double t = std::inner_product(row.begin(), row.end(), beta.begin(), 0.0);
    ll += y[i] * t - softplus(t);
  }
  return ll;
}

std::vector<double> gradient(const RowMatrix& design, std::span<const double> y,
                             std::span<const double> beta) {
  std::vector<double> g(design.cols(), 0.0);
  for (std::size_t i = 0; i < design.rows(); ++i) {
    const auto row = design.row(i);
    const double t = std::inner_product(row.begin(), row.end(), beta.begin(), 0.0);
    const double r = y[i] - sigmoid(t);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += r * row[j];
  }
  return g;
}

}  // namespace logistic

// ---------------------------------------------------------------------------
// LinearPredictor

LinearPredictor::LinearPredictor(ModelKind kind, std::vector<std::string> columns,
                                 std::vector<double> coefficients,
                                 FitDiagnostics diagnostics)
    : kind_(kind), columns_(std::move(columns)), coefficients_(std::move(coefficients)) {
  if (kind_ != ModelKind::Linear && kind_ != ModelKind::Logistic) {
    fail(ErrorKind::InvalidArgument, "coefficient model must be linear or logistic");
  }
  if (coefficients_.size() != columns_.size() + 1) {
    fail(ErrorKind::MalformedInput, "coefficient count must be column count + 1");
  }
  diagnostics_ = std::move(diagnostics);
}

std::vector<double> LinearPredictor::predict(const Dataset& rows) const {
  const auto x = design_matrix(rows, columns_);
  std::vector<double> out(rows.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = x.row(i);
    const double t = std::inner_product(r.begin(), r.end(), coefficients_.begin(), 0.0);
    out[i] = kind_ == ModelKind::Logistic ? logistic::sigmoid(t) : t;
  }
  return out;
}

nlohmann::json LinearPredictor::to_json() const {
  auto coefs = nlohmann::json::array();
  coefs.push_back({{"name", "(intercept)"}, {"value", coefficients_[0]}});
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    coefs.push_back({{"name", columns_[j]}, {"value", coefficients_[j + 1]}});
  }
  return {{"kind", to_string(kind_)},
          {"task", to_string(task())},
          {"coefficients", std::move(coefs)},
          {"diagnostics", diagnostics_.to_json()}};
}

std::unique_ptr<LinearPredictor> fit_linear(const Dataset& train, const FitConfig& config) {
  config.validate();
  auto columns = design_columns(train);
  const auto x = design_matrix(train, columns);
  if (x.rows() < x.cols()) {
    fail(ErrorKind::Singular, "fewer rows than design columns");
  }
  const auto& y = train.target().values;
  const linalg::VectorX beta = linalg::least_squares(
      linalg::view(x), Eigen::Map<const linalg::VectorX>(y.data(), static_cast<Eigen::Index>(y.size())),
      config.ridge_epsilon);
  return std::make_unique<LinearPredictor>(
      ModelKind::Linear, std::move(columns),
      std::vector<double>(beta.data(), beta.data() + beta.size()));
}

std::unique_ptr<LinearPredictor> fit_logistic(const Dataset& train,
                                              const FitConfig& config) {
  config.validate();
  const auto& y = train.target().values;
  std::size_t ones = 0;
  for (double v : y) {
    if (v != 0.0 && v != 1.0) {
      fail(ErrorKind::MalformedInput, "logistic regression needs a 0/1 target");
    }
    ones += v == 1.0;
  }
  if (ones == 0 || ones == y.size()) {
    fail(ErrorKind::MalformedInput, "logistic regression needs rows of both classes");
  }

  auto columns = design_columns(train);
  const auto x = design_matrix(train, columns);
  const auto xm = linalg::view(x);
  const Eigen::Map<const linalg::VectorX> ym(y.data(), static_cast<Eigen::Index>(y.size()));
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto p = static_cast<Eigen::Index>(x.cols());

  FitDiagnostics diag;
  diag.converged = false;
  std::vector<double> beta(static_cast<std::size_t>(p), 0.0);
  double ll = logistic::log_likelihood(x, y, beta);
  diag.log_likelihood.push_back(ll);

  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    diag.iterations = it;
    linalg::VectorX prob(n), weight(n);
    const Eigen::Map<const linalg::VectorX> bm(beta.data(), p);
    const linalg::VectorX eta = xm * bm;
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = logistic::sigmoid(eta[i]);
      weight[i] = prob[i] * (1.0 - prob[i]);
    }
    const linalg::VectorX grad = xm.transpose() * (ym - prob);
    Eigen::MatrixXd hessian = xm.transpose() * weight.asDiagonal() * xm;
    hessian.diagonal().array() += config.ridge_epsilon;
    linalg::VectorX step;
    try {
      step = linalg::solve_spd(hessian, grad);
    } catch (const Error&) {
      // weights underflow once the fitted probabilities saturate; at the
      // first step (all weights 1/4) this is a genuinely singular design
      if (it == 1) throw;
      diag.warnings.push_back(
          "Hessian became singular as fitted probabilities saturated; the classes "
          "look perfectly separable, stopping early");
      break;
    }

    // Newton step with halving until the log-likelihood does not decrease.
    double scale = 1.0;
    std::vector<double> candidate(beta.size());
    double candidate_ll = ll;
    bool accepted = false;
    for (int halving = 0; halving < 50; ++halving, scale *= 0.5) {
      for (std::size_t j = 0; j < beta.size(); ++j) {
        candidate[j] = beta[j] + scale * step[static_cast<Eigen::Index>(j)];
      }
      candidate_ll = logistic::log_likelihood(x, y, candidate);
      if (candidate_ll >= ll) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // no ascent direction left at working precision
      diag.converged = true;
      break;
    }

    double change = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) {
      change = std::max(change, std::abs(candidate[j] - beta[j]));
    }
    beta = candidate;
    ll = candidate_ll;
    diag.log_likelihood.push_back(ll);

    const double norm = std::sqrt(std::inner_product(beta.begin(), beta.end(),
                                                     beta.begin(), 0.0));
    if (norm > config.separation_guard) {
      diag.warnings.push_back(
          "coefficient norm exceeded the separation guard; the classes look "
          "perfectly separable, stopping early");
      break;
    }
    if (change < config.tolerance) {
      diag.converged = true;
      break;
    }
  }
  if (!diag.converged && diag.warnings.empty()) {
    diag.warnings.push_back("logistic regression did not converge in " +
                            std::to_string(config.max_iterations) + " iterations");
  }
  return std::make_unique<LinearPredictor>(ModelKind::Logistic, std::move(columns),
                                           std::move(beta), std::move(diag));
}

// ---------------------------------------------------------------------------
// KnnPredictor

KnnPredictor::KnnPredictor(Task task, std::size_t k, Standardizer standardizer,
                           RowMatrix raw_points, std::vector<double> targets)
    : task_(task),
      k_(k),
      standardizer_(std::move(standardizer)),
      raw_points_(std::move(raw_points)),
      targets_(std::move(targets)) {
  if (k_ == 0) fail(ErrorKind::InvalidArgument, "kNN neighbor count must be >= 1");
  if (k_ > targets_.size()) {
    fail(ErrorKind::InvalidArgument, "kNN neighbor count " + std::to_string(k_) +
                                         " exceeds the " + std::to_string(targets_.size()) +
                                         " training rows");
  }
  if (raw_points_.rows() != targets_.size()) {
    fail(ErrorKind::MalformedInput, "kNN points and targets differ in length");
  }
  tree_ = KdTree(standardizer_.transform(raw_points_));
}

std::vector<double> KnnPredictor::predict(const Dataset& rows) const {
  for (const auto& name : standardizer_.names()) {
    if (!rows.has_column(name)) {
      fail(ErrorKind::SchemaMismatch, "rows lack model column '" + name + "'");
    }
  }
  const auto q = standardizer_.transform(rows);
  std::vector<double> out(rows.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = neighbor_mean(tree_.knn(q.row(i), k_), targets_);
  }
  return out;
}

nlohmann::json KnnPredictor::to_json() const {
  auto points = nlohmann::json::array();
  for (std::size_t i = 0; i < raw_points_.rows(); ++i) {
    const auto r = raw_points_.row(i);
    points.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"kind", "knn"},
          {"task", to_string(task_)},
          {"k", k_},
          {"columns", standardizer_.names()},
          {"means", standardizer_.means()},
          {"sds", standardizer_.sds()},
          {"points", std::move(points)},
          {"targets", targets_},
          {"diagnostics", diagnostics_.to_json()}};
}

std::unique_ptr<KnnPredictor> fit_knn_predictor(const Dataset& train,
                                                const FitConfig& config, Task task) {
  config.validate();
  std::vector<std::string> names = train.names(ColumnRole::Feature);
  for (auto& s : train.names(ColumnRole::Sensitive)) names.push_back(std::move(s));
  auto standardizer = Standardizer::fit(train, names);
  return std::make_unique<KnnPredictor>(task, config.knn, std::move(standardizer),
                                        train.matrix(names), train.target().values);
}

std::unique_ptr<KnnPredictor> fit_knn_predictor(const Dataset& train,
                                                const FitConfig& config) {
  return fit_knn_predictor(train, config, train.infer_task());
}

std::unique_ptr<Predictor> fit_model(ModelKind kind, const Dataset& train,
                                     const FitConfig& config) {
  switch (kind) {
    case ModelKind::Linear: return fit_linear(train, config);
    case ModelKind::Logistic: return fit_logistic(train, config);
    case ModelKind::Knn: return fit_knn_predictor(train, config);
    case ModelKind::External: break;
  }
  fail(ErrorKind::InvalidArgument, "external predictions are loaded, not fitted");
}

// ---------------------------------------------------------------------------
// ExternalPredictor

ExternalPredictor::ExternalPredictor(Task task, std::unordered_map<std::size_t, double> table)
    : task_(task), table_(std::move(table)) {}

double ExternalPredictor::lookup(std::size_t id) const {
  const auto it = table_.find(id);
  if (it == table_.end()) {
    fail(ErrorKind::UnknownId, "no external prediction for row id " + std::to_string(id));
  }
  return it->second;
}

std::vector<double> ExternalPredictor::predict(const Dataset& rows) const {
  std::vector<double> out;
  out.reserve(rows.rows());
  for (auto id : rows.row_ids()) out.push_back(lookup(id));
  return out;
}

nlohmann::json ExternalPredictor::to_json() const {
  return {{"kind", "external"}, {"task", to_string(task_)}, {"rows", table_.size()}};
}

std::unique_ptr<ExternalPredictor> load_external_predictions(
    const std::filesystem::path& path, Task task, std::string_view id_column,
    std::string_view value_column) {
  const auto table = csv::read(path);
  const auto id_pos = table.find(id_column);
  const auto value_pos = table.find(value_column);
  if (id_pos == std::string::npos || value_pos == std::string::npos) {
    fail(ErrorKind::UnknownColumn, path.string() + " must have columns '" +
                                       std::string(id_column) + "' and '" +
                                       std::string(value_column) + "'");
  }
  std::unordered_map<std::size_t, double> values;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& id_text = table.rows[r][id_pos];
    const auto& value_text = table.rows[r][value_pos];
    std::size_t id = 0;
    auto [ip, iec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (iec != std::errc{} || ip != id_text.data() + id_text.size()) {
      fail(ErrorKind::MalformedInput, "bad row id '" + id_text + "' in " + path.string());
    }
    double value = 0.0;
    auto [vp, vec] =
        std::from_chars(value_text.data(), value_text.data() + value_text.size(), value);
    if (vec != std::errc{} || vp != value_text.data() + value_text.size() ||
        !std::isfinite(value)) {
      fail(ErrorKind::MalformedInput,
           "bad prediction '" + value_text + "' for id " + id_text);
    }
    if (task == Task::Classification && (value < 0.0 || value > 1.0)) {
      fail(ErrorKind::OutOfRange,
           "probability " + value_text + " for id " + id_text + " is outside [0, 1]");
    }
    if (!values.emplace(id, value).second) {
      fail(ErrorKind::DuplicateId, "duplicate row id " + id_text + " in " + path.string());
    }
  }
  return std::make_unique<ExternalPredictor>(task, std::move(values));
}

// ---------------------------------------------------------------------------
// Persistence

std::unique_ptr<Predictor> model_from_json(const nlohmann::json& doc) {
  try {
    const auto kind = parse_model_kind(doc.at("kind").get<std::string>());
    if (kind == ModelKind::Linear || kind == ModelKind::Logistic) {
      std::vector<std::string> columns;
      std::vector<double> coefs;
      const auto& entries = doc.at("coefficients");
      for (std::size_t j = 0; j < entries.size(); ++j) {
        if (j > 0) columns.push_back(entries[j].at("name").get<std::string>());
        coefs.push_back(entries[j].at("value").get<double>());
      }
      return std::make_unique<LinearPredictor>(kind, std::move(columns), std::move(coefs));
    }
    if (kind == ModelKind::Knn) {
      auto names = doc.at("columns").get<std::vector<std::string>>();
      Standardizer standardizer(names, doc.at("means").get<std::vector<double>>(),
                                doc.at("sds").get<std::vector<double>>());
      const auto& pts = doc.at("points");
      RowMatrix raw(pts.size(), names.size());
      for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < names.size(); ++j) raw(i, j) = pts[i].at(j).get<double>();
      }
      return std::make_unique<KnnPredictor>(
          parse_task(doc.at("task").get<std::string>()), doc.at("k").get<std::size_t>(),
          std::move(standardizer), std::move(raw),
          doc.at("targets").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedInput, std::string("bad model document: ") + e.what());
  }
  fail(ErrorKind::MalformedInput, "external models cannot be restored from JSON");
}

std::unique_ptr<Predictor> load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "cannot open model " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedInput, "model " + path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

void write_predictions(const std::filesystem::path& path, std::span<const std::size_t> ids,
                       std::span<const double> values, std::string_view value_column) {
  if (ids.size() != values.size()) {
    fail(ErrorKind::InvalidArgument, "ids and values differ in length");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "id," << value_column << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << ',' << csv::format_double(values[i]) << '\n';
  }
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace tdb
