#pragma once

#include <string>
#include <vector>

#include "farmtreat/types.hpp"

namespace farmtreat {

struct OlsFit {
  Vector coef;
  Vector residuals;
  double r2 = 0.0;
};

// Least squares via rank-revealing column-pivoted QR. Throws NumericError
// on rank deficiency or non-finite inputs. r2 is about the mean of y and
// defined as 0 when the total sum of squares vanishes.
inline OlsFit ols_fit(const Matrix& x, const Vector& y) {
  if (x.rows() != y.size())
    throw ValidationError("ols: row count mismatch");
  if (!y.allFinite() || !x.allFinite())
    throw NumericError("ols: non-finite input");

  OlsFit fit;
  const Index k = x.cols();
  if (k == 0) {
    fit.coef.resize(0);
    fit.residuals = y;
  } else {
    if (x.rows() < k)
      throw NumericError("ols: fewer rows than columns (" +
                         std::to_string(x.rows()) + " < " +
                         std::to_string(k) + ")");
    Eigen::ColPivHouseholderQR<Matrix> qr(x);
    if (qr.rank() < k)
      throw NumericError("ols: rank-deficient design (rank " +
                         std::to_string(qr.rank()) + " of " +
                         std::to_string(k) + ")");
    fit.coef = qr.solve(y);
    fit.residuals = y - x * fit.coef;
  }

  const double n = static_cast<double>(y.size());
  const double ybar = y.sum() / n;
  const double tss = (y.array() - ybar).matrix().squaredNorm();
  const double rss = fit.residuals.squaredNorm();
  const double floor =
      8.0 * n * std::numeric_limits<double>::epsilon() *
      std::numeric_limits<double>::epsilon() * std::max(1.0, y.squaredNorm());
  fit.r2 = tss <= floor ? 0.0 : 1.0 - rss / tss;
  return fit;
}

// Index of the first design column that is linearly dependent on its
// predecessors; -1 if the matrix has full column rank.
inline Index first_dependent_column(const Matrix& x) {
  for (Index j = 1; j <= x.cols(); ++j) {
    Eigen::ColPivHouseholderQR<Matrix> qr(x.leftCols(j));
    if (qr.rank() < j) return j - 1;
  }
  return -1;
}

}  // namespace farmtreat
