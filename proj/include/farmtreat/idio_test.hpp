#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "farmtreat/factor.hpp"
#include "farmtreat/parallel.hpp"
#include "farmtreat/rng.hpp"
#include "farmtreat/types.hpp"

namespace farmtreat {

enum class Kernel { kBartlett };

inline Kernel kernel_from_string(const std::string& s) {
  if (s == "bartlett") return Kernel::kBartlett;
  throw ValidationError("unknown kernel: '" + s + "'");
}

inline std::string to_string(Kernel) { return "bartlett"; }

// Kernel-weighted long-run covariance of a p-dimensional series; the
// Newey-West estimator under the Bartlett (triangular) kernel.
struct LongRunCov {
  Matrix cov;  // p x p
  Kernel kernel = Kernel::kBartlett;
  double bandwidth = 1.0;
  Index lags_used = 0;
};

// Newey-West automatic lag choice.
inline double default_bandwidth(Index t0) {
  return std::floor(4.0 * std::pow(static_cast<double>(t0) / 100.0,
                                   2.0 / 9.0)) +
         1.0;
}

// Upsilon = sum_{|l| < T0} k(l/h) M_l with
// M_l = (1/T0) sum_{t=l+1..T0} D_t D_{t-l}', M_{-l} = M_l'.
inline LongRunCov long_run_cov(const Matrix& d, Kernel kernel, double h) {
  if (h < 1.0) throw ValidationError("long_run_cov: bandwidth must be >= 1");
  const Index t0 = d.rows();
  const Index p = d.cols();
  if (t0 < 2) throw ValidationError("long_run_cov: need T0 >= 2");
  if (!d.allFinite()) throw NumericError("long_run_cov: non-finite input");

  LongRunCov out;
  out.kernel = kernel;
  out.bandwidth = h;
  out.cov = Matrix::Zero(p, p);

  for (Index lag = 0; lag < t0; ++lag) {
    const double w = std::max(0.0, 1.0 - static_cast<double>(lag) / h);
    if (w <= 0.0) break;
    out.lags_used = lag;
    Matrix m_l = Matrix::Zero(p, p);
    for (Index t = lag; t < t0; ++t)
      m_l.noalias() += d.row(t).transpose() * d.row(t - lag);
    m_l /= static_cast<double>(t0);
    if (lag == 0) {
      out.cov += m_l;
    } else {
      out.cov += w * (m_l + m_l.transpose());
    }
  }
  // Enforce exact symmetry against fp drift.
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

struct MaxBootstrap {
  std::map<double, double> quantiles;  // tau -> c*(tau)
  double p_value = 1.0;
  std::vector<double> draws;  // sorted ascending
};

// Gaussian multiplier bootstrap of S* = ||Q*||_inf with
// Q* ~ N(0, cov), drawn through the symmetric square root of `cov`
// (eigenvalues clipped at zero). Per-draw counter-based streams make the
// result independent of scheduling.
inline MaxBootstrap gaussian_max_bootstrap(const Matrix& cov, double observed,
                                           Index n_draws, std::uint64_t seed,
                                           int threads = 1) {
  const Index p = cov.rows();
  if (cov.cols() != p) throw ValidationError("bootstrap: non-square cov");

  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  if (es.info() != Eigen::Success)
    throw NumericError("bootstrap: eigendecomposition failed");
  const double trace = std::max(cov.trace(), 0.0);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -1e-8 * std::max(trace, 1.0))
    throw NumericError("bootstrap: covariance indefinite beyond tolerance");
  Vector clipped = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix root =
      es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();

  MaxBootstrap out;
  out.draws.resize(static_cast<std::size_t>(n_draws));
  parallel_for(
      static_cast<std::size_t>(n_draws), threads, [&](std::size_t d) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(d)));
        Vector z(p);
        for (Index i = 0; i < p; ++i) z[i] = rng.normal();
        out.draws[d] = (root * z).lpNorm<Eigen::Infinity>();
      });

  Index exceed = 0;
  for (double s : out.draws)
    if (s >= observed) ++exceed;
  out.p_value = static_cast<double>(exceed) / static_cast<double>(n_draws);

  std::sort(out.draws.begin(), out.draws.end());
  for (double tau : {0.9, 0.95, 0.99}) {
    const auto k = static_cast<std::size_t>(
        std::ceil(tau * static_cast<double>(n_draws)));
    out.quantiles[tau] = out.draws[std::min(k, out.draws.size()) - 1];
  }
  return out;
}

// High-dimensional test of no idiosyncratic predictive power,
// H0: pi_1j = 0 for every peer j. S = ||Q||_inf with
// Q = T0^{-1/2} sum_t D_t and D_t = U_1t * U_{-1,t}.
struct IdioTestReport {
  double statistic = 0.0;
  std::map<double, double> bootstrap_quantiles;
  double p_value = 1.0;
  Index n_draws = 0;
  std::uint64_t seed = 0;
  Kernel kernel = Kernel::kBartlett;
  double bandwidth = 0.0;
};

inline IdioTestReport idio_contribution_test(const FactorFit& factor_fit,
                                             Index treated, Index t0,
                                             Index n_draws, std::uint64_t seed,
                                             Kernel kernel = Kernel::kBartlett,
                                             double bandwidth = 0.0,
                                             int threads = 1) {
  if (n_draws < 500)
    throw ValidationError("idio test: n_draws must be >= 500");
  const Index n = factor_fit.idios.rows();
  const Index t_len = factor_fit.idios.cols();
  if (treated < 0 || treated >= n)
    throw ValidationError("idio test: treated index out of range");
  if (!(0 < t0 && t0 <= t_len))
    throw ValidationError("idio test: t0 out of range");

  const Index p = n - 1;
  Matrix d(t0, p);
  for (Index t = 0; t < t0; ++t) {
    const double u1 = factor_fit.idios(treated, t);
    Index col = 0;
    for (Index i = 0; i < n; ++i) {
      if (i == treated) continue;
      d(t, col++) = u1 * factor_fit.idios(i, t);
    }
  }

  IdioTestReport rep;
  rep.kernel = kernel;
  rep.bandwidth = bandwidth > 0.0 ? bandwidth : default_bandwidth(t0);
  rep.n_draws = n_draws;
  rep.seed = seed;

  const Vector q = d.colwise().sum().transpose() /
                   std::sqrt(static_cast<double>(t0));
  rep.statistic = q.size() > 0 ? q.lpNorm<Eigen::Infinity>() : 0.0;

  const LongRunCov lrc = long_run_cov(d, kernel, rep.bandwidth);
  MaxBootstrap boot = gaussian_max_bootstrap(lrc.cov, rep.statistic, n_draws,
                                             seed, threads);
  rep.p_value = boot.p_value;
  rep.bootstrap_quantiles = std::move(boot.quantiles);
  return rep;
}

}  // namespace farmtreat
