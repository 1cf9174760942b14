#include "towerdebias/theory.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "linalg.hpp"
#include "parallel.hpp"
#include "towerdebias/debias.hpp"
#include "towerdebias/error.hpp"
#include "towerdebias/metrics.hpp"
#include "towerdebias/models.hpp"

namespace tdb::theory {

namespace {

constexpr std::uint64_t kQuerySeedMask = 0xD1B54A32D192ED03ULL;

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd to_eigen(const RowMatrix& m) {
  return linalg::view(m);
}

VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

std::vector<double> to_std(const VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

std::vector<std::string> feature_names(std::size_t p) {
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= p; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

// Fitted values of an OLS regression of y on an intercept plus `columns`.
std::vector<double> ols_fitted(const Dataset& d, std::span<const std::string> columns,
                               std::span<const double> y) {
  if (columns.empty()) {
    return std::vector<double>(y.size(), mean_of(y));
  }
  const auto x = design_matrix(d, columns);
  const auto xm = linalg::view(x);
  const Eigen::Map<const VectorXd> ym(y.data(), static_cast<Index>(y.size()));
  const VectorXd b = linalg::least_squares(xm, ym, 0.0);
  return to_std(xm * b);
}

std::vector<double> ols_coefficients(const Dataset& d, std::span<const std::string> columns,
                                     std::span<const double> y) {
  if (columns.empty()) return {mean_of(y)};
  const auto x = design_matrix(d, columns);
  const Eigen::Map<const VectorXd> ym(y.data(), static_cast<Index>(y.size()));
  return to_std(linalg::least_squares(linalg::view(x), ym, 0.0));
}

Check make_check(std::string name, double measured, double tolerance) {
  return {std::move(name), measured, tolerance, measured <= tolerance};
}

double abs_or_zero(const Correlation& c) { return c.defined() ? std::abs(*c.value) : 0.0; }

}  // namespace

// ---------------------------------------------------------------------------
// GaussianSpec

void GaussianSpec::validate() const {
  const std::size_t d = p + 2;
  if (mean.size() != d || covariance.rows() != d || covariance.cols() != d) {
    fail(ErrorKind::MalformedInput, "Gaussian spec sizes do not match p + 2");
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::isfinite(mean[i])) fail(ErrorKind::MalformedInput, "non-finite mean");
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(covariance(i, j))) {
        fail(ErrorKind::MalformedInput, "non-finite covariance entry");
      }
      if (std::abs(covariance(i, j) - covariance(j, i)) > 1e-12) {
        fail(ErrorKind::MalformedInput, "covariance is not symmetric");
      }
    }
  }
  Eigen::LLT<MatrixXd> llt(to_eigen(covariance));
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::NotPositiveDefinite, "covariance is not positive definite");
  }
}

nlohmann::json GaussianSpec::to_json() const {
  auto cov = nlohmann::json::array();
  for (std::size_t i = 0; i < covariance.rows(); ++i) {
    const auto r = covariance.row(i);
    cov.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"p", p}, {"mean", mean}, {"covariance", std::move(cov)}};
}

GaussianSpec GaussianSpec::from_json(const nlohmann::json& doc) {
  GaussianSpec spec;
  try {
    spec.mean = doc.at("mean").get<std::vector<double>>();
    spec.p = doc.contains("p") ? doc.at("p").get<std::size_t>()
                               : (spec.mean.size() >= 2 ? spec.mean.size() - 2 : 0);
    const auto& rows = doc.at("covariance");
    spec.covariance = RowMatrix(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto values = rows[i].get<std::vector<double>>();
      if (values.size() != rows.size()) {
        fail(ErrorKind::InvalidArgument, "covariance must be square");
      }
      for (std::size_t j = 0; j < values.size(); ++j) spec.covariance(i, j) = values[j];
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedInput, std::string("bad Gaussian spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

GaussianSpec random_spec(std::size_t p, std::uint64_t seed) {
  const std::size_t d = p + 2;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  MatrixXd a(d, d);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) a(i, j) = normal(rng);
  }
  MatrixXd cov = a.transpose() * a;
  cov.diagonal().array() += 0.1;
  cov = 0.5 * (cov + cov.transpose());

  GaussianSpec spec{.p = p, .mean = std::vector<double>(d, 0.0), .covariance = RowMatrix(d, d)};
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      spec.covariance(i, j) = cov(static_cast<Index>(i), static_cast<Index>(j));
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Population quantities

PopulationCoefficients population_coefficients(const GaussianSpec& spec) {
  spec.validate();
  const auto p = static_cast<Index>(spec.p);
  const Index s = p;
  const Index y = p + 1;
  const MatrixXd cov = to_eigen(spec.covariance);
  const VectorXd mu = to_eigen(spec.mean);

  auto solve = [](const MatrixXd& a, const VectorXd& b) -> VectorXd {
    if (a.rows() == 0) return VectorXd(0);
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
      fail(ErrorKind::Singular, "conditioning covariance block is singular");
    }
    return llt.solve(b);
  };

  // Y on (X, S)
  const VectorXd b = solve(cov.topLeftCorner(p + 1, p + 1), cov.col(y).head(p + 1));
  // Y on X, S on X
  const MatrixXd cxx = cov.topLeftCorner(p, p);
  const VectorXd d = solve(cxx, cov.col(y).head(p));
  const VectorXd g = solve(cxx, cov.col(s).head(p));

  PopulationCoefficients out;
  out.alpha = b[p];
  out.beta.push_back(mu[y] - b.dot(mu.head(p + 1)));
  out.delta.push_back(mu[y] - d.dot(mu.head(p)));
  out.gamma.push_back(mu[s] - g.dot(mu.head(p)));
  for (Index j = 0; j < p; ++j) {
    out.beta.push_back(b[j]);
    out.delta.push_back(d[j]);
    out.gamma.push_back(g[j]);
  }
  out.sigma2_eps = std::max(0.0, cov(s, s) - cov.col(s).head(p).dot(g));
  return out;
}

double tower_identity_gap(const PopulationCoefficients& c) {
  double gap = 0.0;
  for (std::size_t j = 0; j < c.delta.size(); ++j) {
    gap = std::max(gap, std::abs(c.delta[j] - (c.beta[j] + c.alpha * c.gamma[j])));
  }
  return gap;
}

RhoReduction rho_reduc_closed_form(const PopulationCoefficients& coeffs,
                                   const GaussianSpec& spec) {
  spec.validate();
  const auto p = static_cast<Index>(spec.p);
  if (coeffs.beta.size() != spec.p + 1 || coeffs.delta.size() != spec.p + 1 ||
      coeffs.gamma.size() != spec.p + 1) {
    fail(ErrorKind::InvalidArgument, "coefficient lengths do not match the spec");
  }
  // Cov of (1, X): the constant coordinate contributes nothing.
  MatrixXd cov_x = MatrixXd::Zero(p + 1, p + 1);
  cov_x.bottomRightCorner(p, p) = to_eigen(spec.covariance).topLeftCorner(p, p);
  const VectorXd beta = to_eigen(coeffs.beta);
  const VectorXd delta = to_eigen(coeffs.delta);
  const VectorXd gamma = to_eigen(coeffs.gamma);
  const double alpha = coeffs.alpha;
  const double var_s = spec.var_s();
  const double var_y = spec.covariance(spec.y_index(), spec.y_index());

  const double b_cov_g = beta.dot(cov_x * gamma);
  const double var1 = beta.dot(cov_x * beta) + alpha * alpha * var_s + 2.0 * alpha * b_cov_g;
  const double var2 = delta.dot(cov_x * delta);
  const double tiny = 1e-14 * var_y;
  if (!(var1 > tiny) || !(var2 > tiny) || !(var_s > 0.0)) {
    fail(ErrorKind::DegenerateSpec,
         "a predictor or S has zero variance; correlations are undefined");
  }
  RhoReduction r;
  r.rho1 = (b_cov_g + alpha * var_s) / (std::sqrt(var1) * std::sqrt(var_s));
  r.rho2 = delta.dot(cov_x * gamma) / (std::sqrt(var2) * std::sqrt(var_s));
  r.reduction = r.rho1 - r.rho2;
  return r;
}

// ---------------------------------------------------------------------------
// Sampling and residualization

Dataset sample(const GaussianSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) fail(ErrorKind::InvalidArgument, "sample size must be >= 1");
  const std::size_t d = spec.p + 2;
  Eigen::LLT<MatrixXd> llt(to_eigen(spec.covariance));
  const MatrixXd l = llt.matrixL();

  std::vector<std::vector<double>> values(d, std::vector<double>(n));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  VectorXd z(static_cast<Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (Index j = 0; j < z.size(); ++j) z[j] = normal(rng);
    const VectorXd x = l * z;
    for (std::size_t j = 0; j < d; ++j) values[j][i] = spec.mean[j] + x[static_cast<Index>(j)];
  }

  std::vector<Column> columns;
  const auto names = feature_names(spec.p);
  for (std::size_t j = 0; j < spec.p; ++j) {
    columns.push_back({.name = names[j], .source = names[j], .role = ColumnRole::Feature,
                       .values = std::move(values[j])});
  }
  columns.push_back({.name = "s", .source = "s", .role = ColumnRole::Sensitive,
                     .values = std::move(values[spec.p])});
  columns.push_back({.name = "y", .source = "y", .role = ColumnRole::Target,
                     .values = std::move(values[spec.p + 1])});
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return Dataset(std::move(columns), {}, std::move(ids));
}

Dataset residualize(const Dataset& data) {
  if (data.rows() < 2) fail(ErrorKind::EmptyTable, "residualization needs at least 2 rows");
  std::vector<std::string> s_columns;
  for (const auto& c : data.columns()) {
    if (c.role != ColumnRole::Sensitive) continue;
    if (c.is_dummy()) {
      const auto* enc = data.encoding(c.source);
      if (enc != nullptr && enc->levels.front() == c.level) continue;
    }
    s_columns.push_back(c.name);
  }
  if (s_columns.empty()) {
    fail(ErrorKind::ConstantColumn, "no varying sensitive columns to residualize on");
  }
  const auto design = design_matrix(data, s_columns);
  const auto dm = linalg::view(design);
  {
    Eigen::ColPivHouseholderQR<linalg::MatrixX> qr(dm);
    if (qr.rank() < dm.cols()) {
      fail(ErrorKind::ConstantColumn, "sensitive columns are constant or collinear");
    }
  }

  Dataset out = data;
  for (const auto& c : data.columns()) {
    if (c.role != ColumnRole::Feature) continue;
    const Eigen::Map<const VectorXd> x(c.values.data(), static_cast<Index>(c.values.size()));
    out = out.with_values(c.name, to_std(linalg::residuals(dm, x)));
  }
  return out;
}

double max_residual_correlation(const Dataset& residualized) {
  double worst = 0.0;
  for (const auto& u : residualized.columns()) {
    if (u.role != ColumnRole::Feature) continue;
    for (const auto& s : residualized.columns()) {
      if (s.role != ColumnRole::Sensitive) continue;
      worst = std::max(worst, abs_or_zero(pearson(u.values, s.values)));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Verifiers

bool CheckReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const Check& CheckReport::at(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  fail(ErrorKind::InvalidArgument, "no check named '" + name + "'");
}

nlohmann::json CheckReport::to_json() const {
  auto list = nlohmann::json::array();
  for (const auto& c : checks) {
    list.push_back({{"name", c.name},
                    {"measured", c.measured},
                    {"tolerance", c.tolerance},
                    {"passed", c.passed}});
  }
  return {{"passed", passed()}, {"checks", std::move(list)}, {"details", details}};
}

CheckReport verify_closed_form(const GaussianSpec& spec, std::size_t n, std::uint64_t seed) {
  const auto coeffs = population_coefficients(spec);
  const auto closed = rho_reduc_closed_form(coeffs, spec);
  const auto d = sample(spec, n, seed);
  const auto& y = d.column("y").values;
  const auto& s = d.column("s").values;
  const auto x_names = feature_names(spec.p);
  auto xs_names = x_names;
  xs_names.push_back("s");

  const auto rho1 = pearson(ols_fitted(d, xs_names, y), s);
  const auto rho2 = pearson(ols_fitted(d, x_names, y), s);
  if (!rho1.defined() || !rho2.defined()) {
    fail(ErrorKind::DegenerateSpec, "sample predictions are constant");
  }
  const double tol = 3.0 / std::sqrt(static_cast<double>(n));
  CheckReport report;
  report.checks.push_back(make_check("rho1_closed_form_vs_sample",
                                     std::abs(*rho1.value - closed.rho1), tol));
  report.checks.push_back(make_check("rho2_closed_form_vs_sample",
                                     std::abs(*rho2.value - closed.rho2), tol));
  report.details = {{"closed_rho1", closed.rho1},
                    {"closed_rho2", closed.rho2},
                    {"closed_reduction", closed.reduction},
                    {"sample_rho1", *rho1.value},
                    {"sample_rho2", *rho2.value}};
  return report;
}

CheckReport verify_tower(const GaussianSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 3) fail(ErrorKind::InvalidArgument, "tower check needs n >= 3");
  const auto d = sample(spec, n, seed);
  const auto& y = d.column("y").values;
  const auto x_names = feature_names(spec.p);
  auto xs_names = x_names;
  xs_names.push_back("s");

  const auto y1 = ols_fitted(d, xs_names, y);
  const auto y2 = ols_fitted(d, x_names, y);
  const double sd_y = std::sqrt(variance_of(y));
  const double root_n = std::sqrt(static_cast<double>(n));
  const double mean_tol = 3.0 * 5.0 * sd_y / root_n;
  const double m1 = mean_of(y1), m2 = mean_of(y2), my = mean_of(y);

  // Regressing E(Y|X,S) fits on X must reproduce the E(Y|X) fit.
  const auto projected = ols_coefficients(d, x_names, y1);
  const auto direct = ols_coefficients(d, x_names, y);
  double coef_gap = 0.0;
  for (std::size_t j = 0; j < direct.size(); ++j) {
    coef_gap = std::max(coef_gap, std::abs(projected[j] - direct[j]));
  }

  CheckReport report;
  report.checks.push_back(make_check("total_expectation_y1", std::abs(m1 - my), mean_tol));
  report.checks.push_back(make_check("total_expectation_y2", std::abs(m2 - my), mean_tol));
  report.checks.push_back(make_check("tower_means", std::abs(m1 - m2), mean_tol));
  report.checks.push_back(make_check("tower_projection", coef_gap, 3.0 * sd_y / root_n));

  const double v1 = variance_of(y1), v2 = variance_of(y2);
  report.details = {{"mean_y", my},
                    {"mean_y1hat", m1},
                    {"mean_y2hat", m2},
                    {"var_y1hat", v1},
                    {"var_y2hat", v2},
                    {"observed_variance_direction",
                     v2 <= v1 ? "var(E(Y|X)) <= var(E(Y|X,S))"
                              : "var(E(Y|X)) > var(E(Y|X,S))"}};
  return report;
}

CheckReport verify_inequality(const GaussianSpec& spec, std::size_t n, std::size_t k,
                              std::uint64_t seed) {
  if (spec.p < 1) fail(ErrorKind::InvalidArgument, "debiasing needs at least one feature");
  // queries are a fresh draw, never members of the index
  const auto reference = sample(spec, n, seed);
  const auto queries = sample(spec, n, seed ^ kQuerySeedMask);
  const auto& s = queries.column("s").values;

  FitConfig fit;
  fit.ridge_epsilon = 0.0;
  const auto model = fit_linear(reference, fit);
  const auto index = DebiasIndex::build(reference, model->predict(reference));
  const auto baseline = model->predict(queries);
  const auto debiased = index.predict(queries, DebiasConfig{.k = k, .clamp = true}).values;

  const auto rho1 = pearson(baseline, s);
  const auto rho2 = pearson(debiased, s);
  const double v1 = variance_of(baseline), v2 = variance_of(debiased);
  const double root_n = std::sqrt(static_cast<double>(n));

  CheckReport report;
  report.checks.push_back(make_check("correlation_reduction",
                                     abs_or_zero(rho2) - abs_or_zero(rho1), 3.0 / root_n));
  report.checks.push_back(
      make_check("variance_order", v2 - v1, 3.0 * v1 * std::sqrt(2.0 / (n - 1.0))));
  report.details = {{"rho_baseline", to_json(rho1)},
                    {"rho_debiased", to_json(rho2)},
                    {"var_baseline", v1},
                    {"var_debiased", v2},
                    {"k", k},
                    {"observed_variance_direction",
                     v2 <= v1 ? "var(debiased) <= var(baseline)"
                              : "var(debiased) > var(baseline)"}};
  return report;
}

// ---------------------------------------------------------------------------
// Suite

nlohmann::json run_suite(const SuiteConfig& config) {
  if (config.trials < 1) fail(ErrorKind::InvalidArgument, "trials must be >= 1");
  if (config.n < 10) fail(ErrorKind::InvalidArgument, "n must be >= 10");
  if (config.p < 1) fail(ErrorKind::InvalidArgument, "p must be >= 1");
  if (config.k < 1) fail(ErrorKind::InvalidArgument, "k must be >= 1");

  struct Trial {
    std::uint64_t spec_seed = 0;
    std::uint64_t sample_seed = 0;
    std::vector<Check> checks;
    nlohmann::json details;
  };
  std::vector<Trial> trials(config.trials);

  detail::parallel_for(config.trials, config.threads, [&](std::size_t t) {
    Trial& trial = trials[t];
    trial.spec_seed = config.seed + t;
    trial.sample_seed = (config.seed + t) ^ 0x9E3779B97F4A7C15ULL;
    const auto spec = random_spec(config.p, trial.spec_seed);
    const auto coeffs = population_coefficients(spec);
    trial.checks.push_back(make_check("tower_identity", tower_identity_gap(coeffs), 1e-10));

    const auto closed = verify_closed_form(spec, config.n, trial.sample_seed);
    const auto tower = verify_tower(spec, config.n, trial.sample_seed);
    const auto residual = max_residual_correlation(
        residualize(sample(spec, config.n, trial.sample_seed)));
    const auto inequality =
        verify_inequality(spec, config.n, config.k, trial.sample_seed);

    for (const auto* r : {&closed, &tower}) {
      trial.checks.insert(trial.checks.end(), r->checks.begin(), r->checks.end());
    }
    trial.checks.push_back(make_check("residual_orthogonality", residual, 1e-10));
    trial.checks.insert(trial.checks.end(), inequality.checks.begin(),
                        inequality.checks.end());
    trial.details = {{"closed_form", closed.details},
                     {"tower", tower.details},
                     {"inequality", inequality.details}};
  });

  // Aggregate per check, in first-seen order.
  std::vector<std::string> order;
  std::map<std::string, std::tuple<std::size_t, double, double>> agg;
  auto trial_list = nlohmann::json::array();
  bool all_passed = true;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    CheckReport r{trials[t].checks, trials[t].details};
    trial_list.push_back({{"trial", t},
                          {"spec_seed", trials[t].spec_seed},
                          {"sample_seed", trials[t].sample_seed},
                          {"report", r.to_json()}});
    for (const auto& c : trials[t].checks) {
      if (!agg.contains(c.name)) {
        order.push_back(c.name);
        agg[c.name] = {0, -std::numeric_limits<double>::infinity(), c.tolerance};
      }
      auto& [passed, worst, tol] = agg[c.name];
      passed += c.passed;
      worst = std::max(worst, c.measured);
      tol = std::max(tol, c.tolerance);
      all_passed = all_passed && c.passed;
    }
  }
  auto summary = nlohmann::json::array();
  for (const auto& name : order) {
    const auto& [passed, worst, tol] = agg[name];
    summary.push_back({{"name", name},
                       {"passed_trials", passed},
                       {"trials", config.trials},
                       {"max_measured", worst},
                       {"max_tolerance", tol},
                       {"passed", passed == config.trials}});
  }
  return {{"config",
           {{"trials", config.trials},
            {"n", config.n},
            {"p", config.p},
            {"k", config.k},
            {"seed", config.seed}}},
          {"all_passed", all_passed},
          {"summary", std::move(summary)},
          {"trials", std::move(trial_list)}};
}

}  // namespace tdb::theory
