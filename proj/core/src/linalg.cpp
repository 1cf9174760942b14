#include "linalg.hpp"

#include "towerdebias/error.hpp"

namespace tdb::linalg {

VectorX least_squares(const Eigen::Ref<const MatrixX>& x,
                      const Eigen::Ref<const VectorX>& y, double ridge) {
  if (ridge < 0.0) fail(ErrorKind::InvalidArgument, "ridge epsilon must be >= 0");
  if (ridge == 0.0) {
    Eigen::ColPivHouseholderQR<MatrixX> qr(x);
    if (qr.rank() < x.cols()) {
      fail(ErrorKind::Singular, "design matrix is rank deficient (rank " +
                                    std::to_string(qr.rank()) + " of " +
                                    std::to_string(x.cols()) + " columns)");
    }
    return qr.solve(y);
  }
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += ridge;
  const VectorX rhs = x.transpose() * y;
  return solve_spd(gram, rhs);
}

VectorX residuals(const Eigen::Ref<const MatrixX>& x, const Eigen::Ref<const VectorX>& y) {
  Eigen::ColPivHouseholderQR<MatrixX> qr(x);
  if (qr.rank() < x.cols()) {
    fail(ErrorKind::Singular, "regressors are constant or collinear");
  }
  VectorX qty = qr.householderQ().transpose() * y;
  qty.head(x.cols()).setZero();
  return qr.householderQ() * qty;
}

VectorX solve_spd(const Eigen::Ref<const Eigen::MatrixXd>& a,
                  const Eigen::Ref<const VectorX>& b, double min_rcond) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      (min_rcond > 0.0 && !(ldlt.rcond() >= min_rcond))) {
    fail(ErrorKind::Singular, "normal equations are singular");
  }
  return ldlt.solve(b);
}

}  // namespace tdb::linalg
