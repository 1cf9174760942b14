#pragma once

#include <Eigen/Dense>

#include "towerdebias/matrix.hpp"

namespace tdb::linalg {

using MatrixX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorX = Eigen::VectorXd;

inline Eigen::Map<const MatrixX> view(const RowMatrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

/// Least-squares coefficients of y on the columns of x.
///
/// ridge == 0 solves by column-pivoting QR and throws Singular when x is
/// rank deficient. ridge > 0 solves (x'x + ridge I) b = x'y.
VectorX least_squares(const Eigen::Ref<const MatrixX>& x,
                      const Eigen::Ref<const VectorX>& y, double ridge);

/// Residuals of y after projection onto the column space of x (Householder
/// QR). Throws Singular when x is rank deficient.
VectorX residuals(const Eigen::Ref<const MatrixX>& x, const Eigen::Ref<const VectorX>& y);

/// Solves a symmetric positive (semi)definite system. Throws Singular when
/// the factorization fails or, with min_rcond > 0, the reciprocal condition
/// estimate falls below it.
VectorX solve_spd(const Eigen::Ref<const Eigen::MatrixXd>& a,
                  const Eigen::Ref<const VectorX>& b, double min_rcond = 0.0);

}  // namespace tdb::linalg
