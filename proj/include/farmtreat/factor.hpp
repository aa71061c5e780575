#pragma once

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "farmtreat/ols.hpp"
#include "farmtreat/types.hpp"

namespace farmtreat {

enum class FactorStrategy { kExcludeTreated, kImpute, kZeroFillPost };

inline FactorStrategy factor_strategy_from_string(const std::string& s) {
  if (s == "exclude_treated") return FactorStrategy::kExcludeTreated;
  if (s == "impute") return FactorStrategy::kImpute;
  if (s == "zero_fill_post") return FactorStrategy::kZeroFillPost;
  throw ValidationError("unknown factor strategy: '" + s + "'");
}

inline std::string to_string(FactorStrategy s) {
  switch (s) {
    case FactorStrategy::kExcludeTreated: return "exclude_treated";
    case FactorStrategy::kImpute: return "impute";
    case FactorStrategy::kZeroFillPost: return "zero_fill_post";
  }
  return "?";
}

struct FactorOptions {
  FactorStrategy strategy = FactorStrategy::kExcludeTreated;
  Index r_max = 0;          // 0 = min(8, m/3, T/3)
  Index rank_override = -1;  // >= 0 fixes the rank, bypassing the selector
};

// Estimated factor structure. Factors satisfy F'F/T = I_r; idios
// reconstruct the residuals exactly: R = loadings * factors' + idios.
struct FactorFit {
  Matrix factors;    // T x r
  Matrix loadings;   // n x r (treated row fitted by regression)
  Matrix idios;      // n x T
  Index rank = 0;
  Vector eigvals;    // descending, as seen by the rank selector
  FactorStrategy strategy = FactorStrategy::kExcludeTreated;
};

namespace detail {

struct EigTop {
  Vector values;   // descending
  Matrix vectors;  // columns aligned with values
};

// Top-k eigenpairs of a symmetric PSD matrix (lower triangle referenced).
inline EigTop top_eigs_sym(Matrix g, Index k) {
  const Index n = g.rows();
  k = std::min(k, n);
  if (k <= 0) return {Vector(0), Matrix(n, 0)};

  std::vector<double> w(static_cast<std::size_t>(n));
  Matrix z(n, k);
  std::vector<lapack_int> isuppz(static_cast<std::size_t>(2 * k));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'L', static_cast<lapack_int>(n), g.data(),
      static_cast<lapack_int>(n), 0.0, 0.0,
      static_cast<lapack_int>(n - k + 1), static_cast<lapack_int>(n), 0.0,
      &found, w.data(), z.data(), static_cast<lapack_int>(n), isuppz.data());
  if (info != 0 || found != k)
    throw NumericError("eigensolver failed (dsyevr info=" +
                       std::to_string(info) + ")");

  // LAPACK returns ascending order; flip and clamp fp-negative zeros.
  EigTop out;
  out.values.resize(k);
  out.vectors.resize(n, k);
  for (Index j = 0; j < k; ++j) {
    out.values[j] = std::max(0.0, w[static_cast<std::size_t>(k - 1 - j)]);
    out.vectors.col(j) = z.col(k - 1 - j);
  }
  return out;
}

}  // namespace detail

// Eigenvalue-ratio rank selector: argmax_{k=1..r_max} eigvals[k]/eigvals[k+1]
// (1-based), ties toward the smaller k.
inline Index select_rank(const Vector& eigvals, Index r_max) {
  if (r_max < 1) throw ValidationError("select_rank: r_max must be >= 1");
  if (eigvals.size() < r_max + 1)
    throw ValidationError("select_rank: need at least r_max+1 eigenvalues");
  for (Index i = 0; i < eigvals.size(); ++i) {
    if (eigvals[i] < 0.0)
      throw ValidationError("select_rank: negative eigenvalue");
    if (i > 0 && eigvals[i] > eigvals[i - 1])
      throw ValidationError("select_rank: eigenvalues not descending");
  }
  if (eigvals[0] < 1e-12)
    throw NumericError("select_rank: degenerate eigenvalues");

  Index best_k = 1;
  double best_ratio = -1.0;
  for (Index k = 1; k <= r_max; ++k) {
    const double num = eigvals[k - 1];
    const double den = eigvals[k];
    double ratio;
    if (den < 1e-300) {
      ratio = num < 1e-300 ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      ratio = num / den;
    }
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_k = k;
    }
  }
  return best_k;
}

inline Index default_r_max(Index m, Index t_len) {
  return std::max<Index>(1, std::min<Index>({8, m / 3, t_len / 3}));
}

// Principal-components factor extraction from an m x T residual matrix.
// Factors are sqrt(T) times the top-r eigenvectors of R'R; loadings are
// R F / T. Works on the smaller of the two Gram matrices. Each factor is
// signed so that its loading column sums to a nonnegative value.
inline void extract_factors(const Matrix& residuals, Index r, Matrix* factors,
                            Matrix* loadings, Vector* eigvals,
                            Index n_eigvals = -1) {
  const Index m = residuals.rows();
  const Index t_len = residuals.cols();
  if (r < 0 || r > std::min(m, t_len))
    throw ValidationError("extract_factors: r out of range");
  if (!residuals.allFinite())
    throw NumericError("extract_factors: non-finite residuals");

  const Index k = std::min(std::max(n_eigvals, r), std::min(m, t_len));
  const double sqrt_t = std::sqrt(static_cast<double>(t_len));

  detail::EigTop eig;
  if (m <= t_len) {
    Matrix g = Matrix::Zero(m, m);
    g.selfadjointView<Eigen::Lower>().rankUpdate(residuals);  // R R'
    eig = detail::top_eigs_sym(std::move(g), k);
  } else {
    Matrix g = Matrix::Zero(t_len, t_len);
    g.selfadjointView<Eigen::Lower>().rankUpdate(residuals.transpose());
    eig = detail::top_eigs_sym(std::move(g), k);
  }

  if (r > 0) {
    const double lead = eig.values.size() ? eig.values[0] : 0.0;
    Index numerical_rank = 0;
    for (Index j = 0; j < eig.values.size(); ++j)
      if (eig.values[j] > lead * 1e-12 && eig.values[j] > 0.0)
        ++numerical_rank;
    if (r > numerical_rank && numerical_rank < k)
      throw NumericError("extract_factors: r=" + std::to_string(r) +
                         " exceeds numerical rank " +
                         std::to_string(numerical_rank));
  }

  Matrix f(t_len, r), lam(m, r);
  if (r > 0) {
    if (m <= t_len) {
      // Eigenvectors are loading directions: lambda = U sigma / sqrt(T),
      // F = sqrt(T) R' U sigma^{-1}.
      for (Index j = 0; j < r; ++j) {
        const double sigma = std::sqrt(eig.values[j]);
        f.col(j) = residuals.transpose() * eig.vectors.col(j) *
                   (sqrt_t / sigma);
        lam.col(j) = eig.vectors.col(j) * (sigma / sqrt_t);
      }
    } else {
      f = eig.vectors.leftCols(r) * sqrt_t;
      lam = residuals * f / static_cast<double>(t_len);
    }
    for (Index j = 0; j < r; ++j) {
      if (lam.col(j).sum() < 0.0) {
        lam.col(j) = -lam.col(j);
        f.col(j) = -f.col(j);
      }
    }
  }

  if (factors) *factors = std::move(f);
  if (loadings) *loadings = std::move(lam);
  if (eigvals) *eigvals = eig.values;
}

// Control-side extraction: everything that does not depend on the treated
// unit's fit window, so it can be shared between the pre-only and
// full-sample variants.
struct ControlFactorCore {
  Matrix factors;        // T x r
  Matrix ctrl_loadings;  // m x r
  Vector eigvals;        // descending, as seen by the rank selector
  Index rank = 0;
};

inline ControlFactorCore factor_core_from_controls(const Matrix& ctrl,
                                                   const FactorOptions& opts) {
  const Index m = ctrl.rows();
  const Index t_len = ctrl.cols();
  const Index r_max = opts.r_max > 0 ? opts.r_max : default_r_max(m, t_len);
  const Index want = std::min<Index>(r_max + 1, std::min(m, t_len));

  ControlFactorCore core;
  extract_factors(ctrl, 0, nullptr, nullptr, &core.eigvals, want);
  core.rank = opts.rank_override >= 0
                  ? opts.rank_override
                  : select_rank(core.eigvals, std::min<Index>(r_max, want - 1));
  if (core.rank > std::min(m, t_len))
    throw ValidationError("factor stage: rank override out of range");
  extract_factors(ctrl, core.rank, &core.factors, &core.ctrl_loadings,
                  nullptr, want);
  return core;
}

// Step 2 on a detrended residual matrix holding one treated unit. Under
// exclude_treated the treated row never enters the extraction; its loading
// comes from regressing the treated residuals on the factors over the
// first `lambda_fit_count` periods (the pre-period by default). Passing a
// precomputed `core` skips the eigendecomposition (exclude_treated only).
inline FactorFit fit_factor_stage(const Matrix& residuals, Index treated,
                                  Index t0, const FactorOptions& opts,
                                  Index lambda_fit_count = -1,
                                  const ControlFactorCore* core = nullptr) {
  const Index n = residuals.rows();
  const Index t_len = residuals.cols();
  if (treated < 0 || treated >= n)
    throw ValidationError("factor stage: treated index out of range");
  if (!(0 < t0 && t0 <= t_len))
    throw ValidationError("factor stage: t0 out of range");
  if (n < 2) throw ValidationError("factor stage: empty control block");
  if (lambda_fit_count < 0) lambda_fit_count = t0;
  if (core && opts.strategy != FactorStrategy::kExcludeTreated)
    throw ValidationError(
        "factor stage: shared control core requires exclude_treated");

  const Index m = n - 1;
  Matrix ctrl(m, t_len);
  Index row = 0;
  for (Index i = 0; i < n; ++i)
    if (i != treated) ctrl.row(row++) = residuals.row(i);

  ControlFactorCore local;
  if (!core) {
    local = factor_core_from_controls(ctrl, opts);
    core = &local;
  }

  FactorFit fit;
  fit.strategy = opts.strategy;
  fit.eigvals = core->eigvals;
  fit.rank = core->rank;

  const Index r_max = opts.r_max > 0 ? opts.r_max : default_r_max(m, t_len);
  const Index want = std::min<Index>(r_max + 1, std::min(m, t_len));

  Matrix factors = core->factors;
  Matrix ctrl_loadings = core->ctrl_loadings;

  auto ols_lambda = [&](const Matrix& fmat) {
    if (fit.rank == 0) return Vector(0);
    return ols_fit(fmat.topRows(lambda_fit_count),
                   residuals.row(treated).head(lambda_fit_count).transpose())
        .coef;
  };

  Vector lambda1;
  switch (opts.strategy) {
    case FactorStrategy::kExcludeTreated: {
      lambda1 = ols_lambda(factors);
      break;
    }
    case FactorStrategy::kZeroFillPost: {
      // Post-period treated observations replaced by 0 for the extraction
      // only.
      Matrix all = residuals;
      all.row(treated).tail(t_len - t0).setZero();
      extract_factors(all, fit.rank, &factors, nullptr, nullptr, want);
      ctrl_loadings = ctrl * factors / static_cast<double>(t_len);
      lambda1 = ols_lambda(factors);
      break;
    }
    case FactorStrategy::kImpute: {
      // Pre-period-only loading for the treated unit, then exactly one
      // refit pass with the post-period imputed.
      Vector lam0 = ols_lambda(factors);
      Matrix all = residuals;
      if (fit.rank > 0) {
        for (Index t = t0; t < t_len; ++t)
          all(treated, t) = lam0.dot(factors.row(t));
      } else {
        all.row(treated).tail(t_len - t0).setZero();
      }
      Matrix all_loadings;
      extract_factors(all, fit.rank, &factors, &all_loadings, nullptr, want);
      lambda1 = fit.rank > 0 ? Vector(all_loadings.row(treated).transpose())
                             : Vector(0);
      Index rr = 0;
      for (Index i = 0; i < n; ++i)
        if (i != treated) ctrl_loadings.row(rr++) = all_loadings.row(i);
      break;
    }
  }

  fit.factors = std::move(factors);
  fit.loadings.resize(n, fit.rank);
  Index rr = 0;
  for (Index i = 0; i < n; ++i) {
    if (i == treated) {
      fit.loadings.row(i) = lambda1.transpose();
    } else {
      fit.loadings.row(i) = ctrl_loadings.row(rr++);
    }
  }
  fit.idios = residuals - fit.loadings * fit.factors.transpose();
  return fit;
}

}  // namespace farmtreat
