#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "farmtreat/design.hpp"
#include "farmtreat/panel.hpp"
#include "farmtreat/rng.hpp"
#include "farmtreat/types.hpp"

namespace farmtreat {

// Two-factor panel generator:
//   Z_it = delta_it + gamma_i' W_t + lambda_i' F_t + U_it
//   F_t  = 0.8 F_{t-1} + V_t,  V_t ~ N(0, 0.25 I)
//   U_1t = beta' U_{-1,t} + eps_1t;  U_it = eps_it otherwise
// W_t is shared across units: a constant, a linear trend, and two iid
// N(1,1) series. Unit 1 is treated at t = T0+1.
struct DgpParams {
  Index t0 = 100;
  Index t2 = 1;
  Index n = 100;
  Index n_factors = 2;
  double factor_ar = 0.8;
  double factor_innov_var = 0.25;
  double eps_var_control = 1.0;
  double eps_var_treated = 1.0;  // 0.25 when beta is nonzero
  bool beta_first_two_half = false;  // else beta = 0
  double delta = 0.0;                // effect on unit 1 at t = T0+1
  std::uint64_t seed = 0;

  // The cross-dependence setting fixes the treated innovation variance.
  static DgpParams standard(Index t0, Index n, bool beta_on, double delta,
                            std::uint64_t seed) {
    DgpParams p;
    p.t0 = t0;
    p.n = n;
    p.beta_first_two_half = beta_on;
    p.eps_var_treated = beta_on ? 0.25 : 1.0;
    p.delta = delta;
    p.seed = seed;
    return p;
  }

  void validate() const {
    if (t0 < 2 || t2 < 1) throw ValidationError("dgp: need t0 >= 2, t2 >= 1");
    if (n < 3) throw ValidationError("dgp: need n >= 3");
    if (n_factors < 1) throw ValidationError("dgp: need n_factors >= 1");
    if (!(std::abs(factor_ar) < 1.0))
      throw ValidationError("dgp: |factor_ar| must be < 1 (stationary case)");
    if (factor_innov_var <= 0.0 || eps_var_control <= 0.0 ||
        eps_var_treated <= 0.0)
      throw ValidationError("dgp: variances must be positive");
  }
};

inline Panel generate(const DgpParams& params) {
  params.validate();
  Rng rng(derive_seed(params.seed, 0x9d60c3f8u));

  const Index n = params.n;
  const Index t_len = params.t0 + params.t2;
  const Index r = params.n_factors;
  const double eps_sd_treated = std::sqrt(params.eps_var_treated);
  const double eps_sd_control = std::sqrt(params.eps_var_control);

  // Shared regressors: [1, t, w1_t, w2_t].
  Matrix w(t_len, 4);
  for (Index t = 0; t < t_len; ++t) {
    w(t, 0) = 1.0;
    w(t, 1) = static_cast<double>(t + 1);
    w(t, 2) = rng.normal(1.0, 1.0);
    w(t, 3) = rng.normal(1.0, 1.0);
  }

  // Unit coefficients: N(0,1) intercept, U(-5,5) trend, N(0.5,1) covariates.
  Matrix gamma(n, 4);
  for (Index i = 0; i < n; ++i) {
    gamma(i, 0) = rng.normal();
    gamma(i, 1) = rng.uniform(-5.0, 5.0);
    gamma(i, 2) = rng.normal(0.5, 1.0);
    gamma(i, 3) = rng.normal(0.5, 1.0);
  }

  // Loadings: treated unit mean -6, variance 0.04; controls mean 2, unit
  // variance.
  Matrix lambda(n, r);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < r; ++k)
      lambda(i, k) = i == 0 ? rng.normal(-6.0, 0.2) : rng.normal(2.0, 1.0);

  // AR(1) factors started from the stationary distribution (no burn-in).
  const double innov_sd = std::sqrt(params.factor_innov_var);
  const double stat_sd = std::sqrt(params.factor_innov_var /
                                   (1.0 - params.factor_ar * params.factor_ar));
  Matrix factors(t_len, r);
  Vector state(r);
  for (Index k = 0; k < r; ++k) state[k] = rng.normal(0.0, stat_sd);
  for (Index t = 0; t < t_len; ++t) {
    for (Index k = 0; k < r; ++k) {
      state[k] = params.factor_ar * state[k] + rng.normal(0.0, innov_sd);
      factors(t, k) = state[k];
    }
  }

  // Idiosyncratics: controls first, then the treated unit's dependence.
  Matrix u(n, t_len);
  for (Index i = 1; i < n; ++i)
    for (Index t = 0; t < t_len; ++t)
      u(i, t) = rng.normal(0.0, eps_sd_control);
  for (Index t = 0; t < t_len; ++t) {
    double link = 0.0;
    if (params.beta_first_two_half && n >= 3)
      link = 0.5 * u(1, t) + 0.5 * u(2, t);
    u(0, t) = link + rng.normal(0.0, eps_sd_treated);
  }

  Panel panel;
  panel.outcomes.resize(n, t_len);
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < t_len; ++t)
      panel.outcomes(i, t) = gamma.row(i).dot(w.row(t)) +
                             lambda.row(i).dot(factors.row(t)) + u(i, t);
  if (params.delta != 0.0) panel.outcomes(0, params.t0) += params.delta;

  // Unit ids padded so lexicographic order matches generation order.
  int width = 1;
  for (Index v = n; v >= 10; v /= 10) ++width;
  width = std::min(width, 18);
  for (Index i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "u%0*ld", width, static_cast<long>(i + 1));
    panel.unit_ids.push_back(buf);
  }

  panel.time_index = TimeIndex::consecutive(t_len);
  panel.t0 = params.t0;
  panel.treated_units = {0};

  Matrix w1 = w.col(2).transpose().replicate(n, 1);
  Matrix w2 = w.col(3).transpose().replicate(n, 1);
  panel.covariates.push_back({"w1", std::move(w1)});
  panel.covariates.push_back({"w2", std::move(w2)});

  panel.validate(true);
  return panel;
}

// The first-stage design matching the generator's W_t.
inline DesignSpec dgp_design() {
  DesignSpec d;
  d.intercept = true;
  d.linear_trend = true;
  d.extra_covariates = {"w1", "w2"};
  return d;
}

}  // namespace farmtreat
