#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "farmtreat/counterfactual.hpp"
#include "farmtreat/types.hpp"

namespace farmtreat {

enum class StatKind { kSumSq, kSumAbs };

inline StatKind stat_kind_from_string(const std::string& s) {
  if (s == "sum_sq") return StatKind::kSumSq;
  if (s == "sum_abs") return StatKind::kSumAbs;
  throw ValidationError("unknown test statistic: '" + s + "'");
}

inline std::string to_string(StatKind k) {
  return k == StatKind::kSumSq ? "sum_sq" : "sum_abs";
}

inline double test_statistic(StatKind kind,
                             const Eigen::Ref<const Vector>& xs) {
  double v = 0.0;
  for (Index i = 0; i < xs.size(); ++i)
    v += kind == StatKind::kSumSq ? xs[i] * xs[i] : std::abs(xs[i]);
  return v;
}

struct PerPeriodP {
  Index period = 0;  // 1-based time position
  double delta = 0.0;
  double p = 0.0;
};

// Block-resampling test of the no-effect null against the empirical
// distribution of the statistic over all T0-T2+1 consecutive pre-period
// residual blocks.
struct ResampleReport {
  StatKind kind = StatKind::kSumAbs;
  double observed = 0.0;
  Vector block_stats;  // phi_j, j = 1..t0-T2+1
  double p_value = 1.0;
  std::vector<PerPeriodP> per_period;
  bool few_blocks_warning = false;
};

namespace detail {

// Finite-sample (add-one) p-value; ties count as >=.
inline double add_one_p(double observed,
                        const Eigen::Ref<const Vector>& blocks) {
  Index count = 0;
  for (Index j = 0; j < blocks.size(); ++j)
    if (blocks[j] >= observed) ++count;
  return static_cast<double>(1 + count) /
         static_cast<double>(1 + blocks.size());
}

}  // namespace detail

inline ResampleReport resample_test(const CounterfactualFit& fit,
                                    StatKind kind = StatKind::kSumAbs) {
  const Index t0 = fit.pre_residuals.size();
  const Index t2 = fit.effects.size();
  if (t2 < 1) throw ValidationError("resample_test: no post periods");
  const Index n_blocks = t0 - t2 + 1;
  if (n_blocks < 5)
    throw ValidationError("resample_test: too few pre-period blocks (" +
                          std::to_string(n_blocks) + " < 5)");

  ResampleReport rep;
  rep.kind = kind;
  rep.few_blocks_warning = n_blocks < 20;
  rep.observed = test_statistic(kind, fit.effects);
  rep.block_stats.resize(n_blocks);
  for (Index j = 0; j < n_blocks; ++j)
    rep.block_stats[j] =
        test_statistic(kind, fit.pre_residuals.segment(j, t2));
  rep.p_value = detail::add_one_p(rep.observed, rep.block_stats);

  // Per-period p-values slide single-residual blocks against |delta_t|.
  Vector singles(t0);
  for (Index j = 0; j < t0; ++j)
    singles[j] = test_statistic(kind, fit.pre_residuals.segment(j, 1));
  for (Index k = 0; k < t2; ++k) {
    PerPeriodP pp;
    pp.period = fit.t0 + k + 1;
    pp.delta = fit.effects[k];
    pp.p = detail::add_one_p(test_statistic(kind, fit.effects.segment(k, 1)),
                             singles);
    rep.per_period.push_back(pp);
  }
  return rep;
}

}  // namespace farmtreat
