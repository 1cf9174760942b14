#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "towerdebias/data.hpp"
#include "towerdebias/matrix.hpp"

namespace tdb::theory {

/// Multivariate normal (X_1..X_p, S, Y) with scalar S and Y.
struct GaussianSpec {
  std::size_t p = 0;
  std::vector<double> mean;  // length p + 2
  RowMatrix covariance;      // (p + 2) x (p + 2)

  std::size_t s_index() const noexcept { return p; }
  std::size_t y_index() const noexcept { return p + 1; }
  double var_s() const { return covariance(p, p); }

  /// Sizes agree, covariance symmetric within 1e-12 and positive definite.
  void validate() const;

  nlohmann::json to_json() const;
  static GaussianSpec from_json(const nlohmann::json& doc);
};

/// Zero means and covariance A'A + 0.1 I, A a (p+2)x(p+2) standard normal
/// matrix drawn from the seed.
GaussianSpec random_spec(std::size_t p, std::uint64_t seed);

/// Population regression coefficients; vectors have length p + 1 with the
/// intercept first.
///   E(Y | X, S) = X beta + alpha S
///   E(Y | X)    = X delta
///   S           = X gamma + eps,  Var(eps) = sigma2_eps
struct PopulationCoefficients {
  std::vector<double> beta;
  double alpha = 0.0;
  std::vector<double> delta;
  std::vector<double> gamma;
  double sigma2_eps = 0.0;
};

/// Conditional-Gaussian moment formulas; no sampling.
PopulationCoefficients population_coefficients(const GaussianSpec& spec);

/// Largest |delta - (beta + alpha gamma)| over all entries.
double tower_identity_gap(const PopulationCoefficients& c);

struct RhoReduction {
  double rho1 = 0.0;  // rho(X beta + alpha S, S)
  double rho2 = 0.0;  // rho(X delta, S)
  double reduction = 0.0;  // rho1 - rho2
};

/// Closed-form correlations of the two population predictors with S.
/// Throws DegenerateSpec when Var(Y1), Var(Y2) or Var(S) vanishes.
RhoReduction rho_reduc_closed_form(const PopulationCoefficients& coeffs,
                                   const GaussianSpec& spec);

/// n iid draws as a Dataset with features x1..xp, sensitive s and target y.
Dataset sample(const GaussianSpec& spec, std::size_t n, std::uint64_t seed);

/// Replaces every feature column by its OLS residual on the sensitive
/// columns (with intercept). Throws ConstantColumn when S is constant.
Dataset residualize(const Dataset& data);

struct Check {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct CheckReport {
  std::vector<Check> checks;
  nlohmann::json details = nlohmann::json::object();

  bool passed() const;
  const Check& at(const std::string& name) const;
  nlohmann::json to_json() const;
};

/// Fits E(Y|X,S) and E(Y|X) by OLS on a sample and compares sample
/// correlations with S against rho_reduc_closed_form (tolerance 3 / sqrt(n)).
CheckReport verify_closed_form(const GaussianSpec& spec, std::size_t n, std::uint64_t seed);

/// Law of total expectation and the tower step at the linear-model level:
/// mean(Y1hat) vs mean(Y2hat) vs mean(Y), and the regression of Y1hat on X
/// vs the direct fit Y2hat.
CheckReport verify_tower(const GaussianSpec& spec, std::size_t n, std::uint64_t seed);

/// Fits Y1hat on one sample of n rows and indexes it, then on an independent
/// query sample checks |rho(debiased, S)| <= |rho(Y1hat, S)| + 3 / sqrt(n).
/// Also checks Var(debiased) <= Var(Y1hat) and reports the observed direction.
CheckReport verify_inequality(const GaussianSpec& spec, std::size_t n, std::size_t k,
                              std::uint64_t seed);

/// Largest |rho(U_j, S)| over residualized features and sensitive columns;
/// undefined correlations (constant residuals) count as 0.
double max_residual_correlation(const Dataset& residualized);

struct SuiteConfig {
  std::size_t trials = 10;
  std::size_t n = 100000;
  std::size_t p = 2;
  std::size_t k = 25;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
};

/// Runs every check on `trials` random specs and aggregates per check.
nlohmann::json run_suite(const SuiteConfig& config);

}  // namespace tdb::theory
