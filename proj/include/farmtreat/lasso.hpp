#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "farmtreat/types.hpp"

namespace farmtreat {

// Solution of  min_theta  sum_t (y_t - theta'x_t)^2 + xi * ||theta||_1.
// The objective carries no 1/T0 factor, so `penalty` is on the same scale
// as the squared-error sum. Coordinates are descended on RMS-standardized
// columns internally; `theta` is reported on the original scale and
// `standardization` records the per-column scales used.
struct LassoFit {
  Vector theta;
  double penalty = 0.0;
  std::vector<Index> active_set;
  double objective = 0.0;
  Vector standardization;
  Index n_sweeps = 0;
  std::vector<double> objective_per_sweep;
};

struct LassoOptions {
  double tol = 1e-8;        // max standardized-coefficient change per sweep
  Index max_sweeps = 10000;
};

namespace detail {

inline double soft_threshold(double z, double a) {
  if (z > a) return z - a;
  if (z < -a) return z + a;
  return 0.0;
}

// Pre-standardized problem, reused across a penalty path.
class LassoWork {
 public:
  LassoWork(const Matrix& x, const Vector& yy) : y_(yy) {
    if (x.rows() != yy.size())
      throw ValidationError("lasso: row count mismatch");
    if (!x.allFinite() || !yy.allFinite())
      throw NumericError("lasso: non-finite input");
    const Index t0 = x.rows();
    const Index p = x.cols();
    xs_ = x;
    scales_.resize(p);
    col_sq_.resize(p);
    for (Index j = 0; j < p; ++j) {
      const double s =
          std::sqrt(x.col(j).squaredNorm() / static_cast<double>(t0));
      scales_[j] = s;
      if (s > 0.0) xs_.col(j) /= s;
      col_sq_[j] = xs_.col(j).squaredNorm();
    }
  }

  const Vector& scales() const { return scales_; }

  // Smallest penalty with an all-zero solution, on the raw scale:
  // 2 * ||X'y||_inf.
  double xi_max() const {
    double m = 0.0;
    for (Index j = 0; j < scales_.size(); ++j) {
      if (scales_[j] <= 0.0) continue;
      m = std::max(m, std::abs(scales_[j] * xs_.col(j).dot(y_)));
    }
    return 2.0 * m;
  }

  // Cyclic coordinate descent with soft-thresholding, cycling over the
  // active set between full sweeps. `theta_s` holds standardized
  // coefficients and doubles as the warm start. Ill-conditioned fits that
  // crawl along near-flat directions are finished by an exact active-set
  // solve gated on the full KKT conditions.
  LassoFit solve(double xi, Vector& theta_s, const LassoOptions& opts) const {
    if (xi < 0.0) throw ValidationError("lasso: negative penalty");
    const Index p = xs_.cols();
    Vector resid = y_ - xs_ * theta_s;

    LassoFit fit;
    fit.penalty = xi;
    fit.standardization = scales_;

    auto record = [&] {
      double l1 = 0.0;
      for (Index j = 0; j < p; ++j)
        if (scales_[j] > 0.0) l1 += std::abs(theta_s[j]) / scales_[j];
      fit.objective_per_sweep.push_back(resid.squaredNorm() + xi * l1);
      ++fit.n_sweeps;
    };

    auto sweep = [&](bool active_only) {
      double max_delta = 0.0;
      for (Index j = 0; j < p; ++j) {
        if (scales_[j] <= 0.0) continue;
        if (active_only && theta_s[j] == 0.0) continue;
        const double z = xs_.col(j).dot(resid) + col_sq_[j] * theta_s[j];
        const double updated =
            soft_threshold(z, 0.5 * xi / scales_[j]) / col_sq_[j];
        const double delta = updated - theta_s[j];
        if (delta != 0.0) {
          resid -= delta * xs_.col(j);
          theta_s[j] = updated;
        }
        max_delta = std::max(max_delta, std::abs(delta));
      }
      record();
      return max_delta;
    };

    bool converged = false;
    double last_delta = 0.0;
    Index next_polish_round = 2;
    for (Index round = 0; !converged; ++round) {
      if (fit.n_sweeps >= opts.max_sweeps) break;
      last_delta = sweep(false);
      if (last_delta < opts.tol) {
        converged = true;
        break;
      }
      if (xi > 0.0 && round >= next_polish_round) {
        next_polish_round = round + std::max<Index>(2, round);  // backoff
        if (polish(xi, theta_s, resid)) {
          record();
          converged = true;
          break;
        }
      }
      for (Index a = 0; a < 50 && fit.n_sweeps < opts.max_sweeps; ++a) {
        last_delta = sweep(true);
        if (last_delta < opts.tol) break;
      }
    }
    if (!converged)
      throw NumericError("lasso: no convergence after " +
                         std::to_string(opts.max_sweeps) +
                         " sweeps (last delta=" + std::to_string(last_delta) +
                         ")");

    fit.theta.resize(p);
    for (Index j = 0; j < p; ++j)
      fit.theta[j] = scales_[j] > 0.0 ? theta_s[j] / scales_[j] : 0.0;
    for (Index j = 0; j < p; ++j)
      if (fit.theta[j] != 0.0) fit.active_set.push_back(j);
    fit.objective = fit.objective_per_sweep.back();
    return fit;
  }

 private:
  // Primal active-set refinement (Lawson-Hanson style, adapted to the
  // signed lasso system):
  //   Xa'Xa theta_a = Xa'y - (xi/2) diag(1/s_a) sign_a.
  // Sign-infeasible solves trigger a ratio-test step that zeroes the
  // blocking coordinate (strict objective descent, so no cycling);
  // sign-feasible solves admit the worst inactive KKT violator. Adoption
  // happens only when no violation remains, i.e. the full KKT conditions
  // certify a global minimizer of the convex objective.
  bool polish(double xi, Vector& theta_s, Vector& resid) const {
    const Index p = xs_.cols();
    const Index rows = xs_.rows();
    const double scale = std::max(1.0, grad_scale());
    const double slack = 1e-7 * scale;

    std::vector<Index> act;
    std::vector<double> sgn;
    std::vector<double> cur;
    for (Index j = 0; j < p; ++j) {
      if (scales_[j] <= 0.0) continue;
      if (theta_s[j] != 0.0) {
        act.push_back(j);
        sgn.push_back(theta_s[j] > 0.0 ? 1.0 : -1.0);
        cur.push_back(theta_s[j]);
      } else {
        const double g = xs_.col(j).dot(resid);
        if (std::abs(g) >= 0.5 * xi / scales_[j] - slack && g != 0.0) {
          act.push_back(j);
          sgn.push_back(g > 0.0 ? 1.0 : -1.0);
          cur.push_back(0.0);
        }
      }
    }
    if (act.empty() || static_cast<Index>(act.size()) > rows) {
#ifdef FARMTREAT_LASSO_DEBUG
      std::fprintf(stderr, "[polish] bail: initial set size %zu rows %ld\n", act.size(), (long)rows);
#endif
      return false;
    }

    // Gram block over the initial candidates, extended on demand.
    Matrix gram(act.size(), act.size());
    Matrix cols(rows, act.size());
    for (std::size_t k = 0; k < act.size(); ++k) cols.col(k) = xs_.col(act[k]);
    gram = cols.transpose() * cols;

    for (int iter = 0; iter < 40; ++iter) {
      const Index a = static_cast<Index>(act.size());
      if (a == 0 || a > rows) return false;
      Vector rhs(a);
      for (Index k = 0; k < a; ++k) {
        const Index j = act[static_cast<std::size_t>(k)];
        rhs[k] = xs_.col(j).dot(y_) -
                 0.5 * xi * sgn[static_cast<std::size_t>(k)] / scales_[j];
      }
      // Damped factorization with iterative refinement against the exact
      // Gram block; the active set can be numerically rank-deficient, but
      // the stationarity system stays consistent at the optimum.
      const double damp =
          1e-10 * std::max(1.0, gram.trace() / static_cast<double>(a));
      Matrix damped = gram;
      damped.diagonal().array() += damp;
      Eigen::LDLT<Matrix> ldlt(damped);
      if (ldlt.info() != Eigen::Success) return false;
      Vector sol = ldlt.solve(rhs);
      for (int refine = 0; refine < 4; ++refine) {
        const Vector resid_lin = rhs - gram * sol;
        if (resid_lin.lpNorm<Eigen::Infinity>() <= 1e-10 * scale) break;
        sol += ldlt.solve(resid_lin);
      }
      if ((gram * sol - rhs).lpNorm<Eigen::Infinity>() > 1e-8 * scale) {
#ifdef FARMTREAT_LASSO_DEBUG
        std::fprintf(stderr, "[polish] bail: solve residual %.3e (allow %.3e) a=%ld iter=%d\n",
                     (gram * sol - rhs).lpNorm<Eigen::Infinity>(), 1e-8 * scale, (long)a, iter);
#endif
        return false;
      }

      bool infeasible = false;
      double alpha = 1.0;
      for (Index k = 0; k < a; ++k) {
        if (sol[k] * sgn[static_cast<std::size_t>(k)] > 0.0) continue;
        infeasible = true;
        const double from = cur[static_cast<std::size_t>(k)];
        const double step = from == sol[k] ? 0.0 : from / (from - sol[k]);
        alpha = std::min(alpha, std::max(0.0, step));
      }
      if (infeasible) {
        // Move to the last sign-feasible point and drop what hit zero.
        std::vector<Index> keep;
        for (Index k = 0; k < a; ++k) {
          const double moved =
              cur[static_cast<std::size_t>(k)] +
              alpha * (sol[k] - cur[static_cast<std::size_t>(k)]);
          const bool crossed =
              sol[k] * sgn[static_cast<std::size_t>(k)] <= 0.0 &&
              (from_zero(cur[static_cast<std::size_t>(k)]) ||
               moved * sgn[static_cast<std::size_t>(k)] <= 1e-14);
          if (crossed) continue;
          cur[static_cast<std::size_t>(k)] = moved;
          keep.push_back(k);
        }
        if (keep.size() == act.size()) {
#ifdef FARMTREAT_LASSO_DEBUG
          std::fprintf(stderr, "[polish] bail: ratio step made no progress a=%ld iter=%d alpha=%.3e\n", (long)a, iter, alpha);
#endif
          return false;  // no progress
        }
        shrink(act, sgn, cur, gram, keep);
        continue;
      }

      for (Index k = 0; k < a; ++k) cur[static_cast<std::size_t>(k)] = sol[k];
      Vector r = y_;
      for (Index k = 0; k < a; ++k)
        r -= sol[k] * xs_.col(act[static_cast<std::size_t>(k)]);

      // Worst inactive violator enters with the sign of its gradient.
      Index enter = -1;
      double worst = slack;
      double enter_sign = 0.0;
      std::vector<char> in_act(static_cast<std::size_t>(p), 0);
      for (Index j : act) in_act[static_cast<std::size_t>(j)] = 1;
      for (Index j = 0; j < p; ++j) {
        if (scales_[j] <= 0.0 || in_act[static_cast<std::size_t>(j)]) continue;
        const double g = xs_.col(j).dot(r);
        const double excess = std::abs(g) - 0.5 * xi / scales_[j];
        if (excess > worst) {
          worst = excess;
          enter = j;
          enter_sign = g > 0.0 ? 1.0 : -1.0;
        }
      }
      if (enter < 0) {
        // KKT certificate passed; adopt the exact solution.
        theta_s.setZero();
        for (Index k = 0; k < a; ++k)
          theta_s[act[static_cast<std::size_t>(k)]] = cur[static_cast<std::size_t>(k)];
        resid = std::move(r);
        return true;
      }
      if (a + 1 > rows) {
#ifdef FARMTREAT_LASSO_DEBUG
        std::fprintf(stderr, "[polish] bail: set would exceed rows a=%ld\n", (long)a);
#endif
        return false;
      }
      grow(act, sgn, cur, gram, enter, enter_sign);
    }
#ifdef FARMTREAT_LASSO_DEBUG
    std::fprintf(stderr, "[polish] bail: iteration cap\n");
#endif
    return false;
  }

  static bool from_zero(double v) { return v == 0.0; }

  void shrink(std::vector<Index>& act, std::vector<double>& sgn,
              std::vector<double>& cur, Matrix& gram,
              const std::vector<Index>& keep) const {
    const Index kn = static_cast<Index>(keep.size());
    Matrix g2(kn, kn);
    std::vector<Index> act2;
    std::vector<double> sgn2, cur2;
    for (Index r = 0; r < kn; ++r) {
      act2.push_back(act[static_cast<std::size_t>(keep[static_cast<std::size_t>(r)])]);
      sgn2.push_back(sgn[static_cast<std::size_t>(keep[static_cast<std::size_t>(r)])]);
      cur2.push_back(cur[static_cast<std::size_t>(keep[static_cast<std::size_t>(r)])]);
      for (Index c = 0; c < kn; ++c)
        g2(r, c) = gram(keep[static_cast<std::size_t>(r)],
                        keep[static_cast<std::size_t>(c)]);
    }
    act = std::move(act2);
    sgn = std::move(sgn2);
    cur = std::move(cur2);
    gram = std::move(g2);
  }

  void grow(std::vector<Index>& act, std::vector<double>& sgn,
            std::vector<double>& cur, Matrix& gram, Index enter,
            double enter_sign) const {
    const Index a = static_cast<Index>(act.size());
    Matrix g2(a + 1, a + 1);
    g2.topLeftCorner(a, a) = gram;
    for (Index k = 0; k < a; ++k) {
      const double v =
          xs_.col(act[static_cast<std::size_t>(k)]).dot(xs_.col(enter));
      g2(k, a) = v;
      g2(a, k) = v;
    }
    g2(a, a) = xs_.col(enter).squaredNorm();
    gram = std::move(g2);
    act.push_back(enter);
    sgn.push_back(enter_sign);
    cur.push_back(0.0);
  }

  double grad_scale() const {
    if (grad_scale_ < 0.0) {
      double m = 0.0;
      for (Index j = 0; j < xs_.cols(); ++j)
        m = std::max(m, std::abs(xs_.col(j).dot(y_)));
      grad_scale_ = m;
    }
    return grad_scale_;
  }

  Matrix xs_;       // columns scaled to RMS 1 (zero columns left as-is)
  Vector scales_;   // s_j = ||x_j|| / sqrt(T0); 0 for empty columns
  Vector col_sq_;   // ||xs_j||^2
  const Vector& y_;
  mutable double grad_scale_ = -1.0;  // ||Xs'y||_inf, computed on demand
};

}  // namespace detail

// No-intercept LASSO (inputs are idiosyncratic components, mean ~ 0 by
// construction).
inline LassoFit lasso_fit(const Matrix& x, const Vector& y, double xi,
                          const LassoOptions& opts = {}) {
  detail::LassoWork work(x, y);
  Vector theta_s = Vector::Zero(x.cols());
  return work.solve(xi, theta_s, opts);
}

struct LassoPathPoint {
  double xi = 0.0;
  LassoFit fit;
  double bic = 0.0;
};

struct LassoPath {
  double xi_star = 0.0;
  LassoFit best;
  std::vector<LassoPathPoint> points;  // descending in xi
};

// BIC penalty selection over a log-spaced grid from xi_max (smallest
// penalty with an all-zero fit, 2*||X'y||_inf) down to xi_max * 1e-4.
// BIC(xi) = T0 log(RSS/(T0-|active|)) + |active| log(T0); ties go to the
// larger (sparser) penalty. The residual degrees of freedom in the
// variance estimate keep the criterion non-degenerate when p is close to
// T0, where log(RSS/T0) diverges on near-interpolating fits; at sparse
// optima the correction is O(|active|/T0). The denominator is floored at
// one.
//
// The descent also stops once the fit saturates (explained share of
// ||y||^2 above 0.999, or a relative gain below 1e-5 between grid
// points), mirroring reference lasso paths.
inline LassoPath select_penalty_bic(const Matrix& x, const Vector& y,
                                    Index grid_size = 100,
                                    const LassoOptions& opts = {}) {
  if (grid_size < 2)
    throw ValidationError("lasso: BIC grid needs at least 2 points");
  detail::LassoWork work(x, y);
  const double t0 = static_cast<double>(x.rows());
  const double xi_max = work.xi_max();

  LassoPath path;
  Vector theta_s = Vector::Zero(x.cols());

  auto rss_of = [](const LassoFit& fit) {
    return fit.objective - fit.penalty * fit.theta.lpNorm<1>();
  };
  auto bic_of = [&](const LassoFit& fit) {
    const double active = static_cast<double>(fit.active_set.size());
    const double df_resid = std::max(1.0, t0 - active);
    return t0 * std::log(rss_of(fit) / df_resid) + active * std::log(t0);
  };

  if (xi_max <= 0.0) {
    // y is orthogonal to every column; the path collapses to theta = 0.
    LassoFit fit = work.solve(0.0, theta_s, opts);
    path.points.push_back({0.0, fit, bic_of(fit)});
    path.xi_star = 0.0;
    path.best = std::move(fit);
    return path;
  }

  const double ratio = 1e-4;
  const double null_rss = y.squaredNorm();
  double best_bic = std::numeric_limits<double>::infinity();
  double prev_dev = 0.0;
  for (Index i = 0; i < grid_size; ++i) {
    const double frac =
        static_cast<double>(i) / static_cast<double>(grid_size - 1);
    const double xi = xi_max * std::pow(ratio, frac);
    LassoFit fit = work.solve(xi, theta_s, opts);  // warm start
    const double bic = bic_of(fit);
    const double dev = 1.0 - rss_of(fit) / null_rss;
    path.points.push_back({xi, fit, bic});
    if (bic < best_bic) {
      best_bic = bic;
      path.xi_star = xi;
      path.best = path.points.back().fit;
    }
    if (dev > 0.999) break;
    if (i > 0 && dev - prev_dev < 1e-5 * dev) break;
    prev_dev = dev;
  }
  return path;
}

}  // namespace farmtreat
