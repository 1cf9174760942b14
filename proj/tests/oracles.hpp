#pragma once

// Reference computations written without the library, used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

namespace tdb::oracle {

using Matrix = std::vector<std::vector<double>>;

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation, two passes.
inline double sd(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double variance(const std::vector<double>& v) {
  const double s = sd(v);
  return s * s;
}

// Two-pass Pearson correlation; NaN when either side is constant.
inline double pearson(const std::vector<double>& u, const std::vector<double>& v) {
  const double mu = mean(u), mv = mean(v);
  double suv = 0.0, suu = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    suv += (u[i] - mu) * (v[i] - mv);
    suu += (u[i] - mu) * (u[i] - mu);
    svv += (v[i] - mv) * (v[i] - mv);
  }
  if (suu == 0.0 || svv == 0.0) return std::nan("");
  return suv / std::sqrt(suu) / std::sqrt(svv);
}

inline double mean_abs_error(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double error_rate(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < a.size(); ++i) wrong += (a[i] == b[i]) ? 0 : 1;
  return static_cast<double>(wrong) / static_cast<double>(a.size());
}

// Sort every row by (squared distance, index) and keep the first k indices.
inline std::vector<std::size_t> brute_knn(const Matrix& points, const std::vector<double>& q,
                                          std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double diff = points[i][j] - q[j];
      d += diff * diff;
    }
    all.emplace_back(d, i);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

// Mean of values over the given indices, summed in ascending index order.
inline double average_at(std::vector<std::size_t> idx, const std::vector<double>& values) {
  std::sort(idx.begin(), idx.end());
  double s = 0.0;
  for (auto i : idx) s += values[i];
  return s / static_cast<double>(idx.size());
}

// Gaussian elimination with partial pivoting; a is n x n.
inline std::vector<double> solve(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j < n; ++j) a[r][j] -= f * a[c][j];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t j = r + 1; j < n; ++j) s -= a[r][j] * x[j];
    x[r] = s / a[r][r];
  }
  return x;
}

// OLS through the normal equations X'X b = X'y. Columns of x are predictors
// (an intercept column is added in front).
inline std::vector<double> normal_equations(const std::vector<std::vector<double>>& columns,
                                            const std::vector<double>& y) {
  const std::size_t p = columns.size() + 1;
  const std::size_t n = y.size();
  auto col = [&](std::size_t j, std::size_t i) { return j == 0 ? 1.0 : columns[j - 1][i]; };
  Matrix xtx(p, std::vector<double>(p, 0.0));
  std::vector<double> xty(p, 0.0);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t i = 0; i < n; ++i) xty[a] += col(a, i) * y[i];
    for (std::size_t b = 0; b < p; ++b) {
      for (std::size_t i = 0; i < n; ++i) xtx[a][b] += col(a, i) * col(b, i);
    }
  }
  return solve(xtx, xty);
}

// Inverse of a 2x2 matrix applied to a vector.
inline std::pair<double, double> solve2(double a, double b, double c, double d, double r0,
                                        double r1) {
  const double det = a * d - b * c;
  return {(d * r0 - b * r1) / det, (-c * r0 + a * r1) / det};
}

}  // namespace tdb::oracle
