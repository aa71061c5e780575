#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "farmtreat/counterfactual.hpp"
#include "farmtreat/dgp.hpp"
#include "farmtreat/inference.hpp"
#include "farmtreat/parallel.hpp"
#include "farmtreat/stats.hpp"

namespace farmtreat {

inline const std::vector<double>& mc_alphas() {
  static const std::vector<double> a = {0.01, 0.05, 0.10};
  return a;
}

struct McVariantStats {
  double mean = 0.0;
  double median = 0.0;
  double mse = 0.0;
  std::map<double, double> rejection;  // alpha -> rate
};

struct McCell {
  Method method = Method::kFarmTreat;
  Index t0 = 0;
  Index n = 0;
  McVariantStats pre_only;
  McVariantStats full_sample;
  Index n_effective = 0;
  Index failures = 0;
};

struct McReport {
  std::vector<McCell> cells;
  Index n_reps = 0;
  std::uint64_t seed = 0;
  double delta = 0.0;
  bool beta_on = true;
  StatKind kind = StatKind::kSumAbs;
};

namespace detail {

inline MethodSpec mc_method_spec(Method m) {
  MethodSpec spec;
  spec.method = m;
  spec.design = dgp_design();
  if (m == Method::kFarmTreat || m == Method::kPcr)
    spec.factor = FactorOptions{};
  if (m == Method::kFarmTreat || m == Method::kArco)
    spec.lasso = LassoStageOptions{};
  return spec;
}

struct RepRecord {
  bool failed = false;
  double delta_pre = 0.0, delta_full = 0.0;
  double p_pre = 1.0, p_full = 1.0;
};

inline McVariantStats reduce_variant(const std::vector<double>& deltas,
                                     const std::vector<double>& ps,
                                     double truth) {
  McVariantStats s;
  s.mean = mean_of(deltas);
  s.median = median_of(deltas);
  std::vector<double> sq(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i)
    sq[i] = (deltas[i] - truth) * (deltas[i] - truth);
  s.mse = mean_of(sq);
  for (double alpha : mc_alphas()) {
    Index hits = 0;
    for (double p : ps)
      if (p <= alpha) ++hits;
    s.rejection[alpha] =
        ps.empty() ? 0.0
                   : static_cast<double>(hits) / static_cast<double>(ps.size());
  }
  return s;
}

}  // namespace detail

// Monte Carlo over a (T0, n) grid. Replication r draws its panel from the
// stream (seed, r), so every method and both sample variants see the same
// data (paired comparisons). A failed replication is excluded and counted;
// more than 5% failures fails the run.
inline McReport run_monte_carlo(
    const std::vector<std::pair<Index, Index>>& grid,
    const std::vector<Method>& methods, Index n_reps, std::uint64_t seed,
    double delta, bool beta_on, int threads = 1,
    StatKind kind = StatKind::kSumAbs) {
  if (n_reps < 50)
    throw ValidationError("monte carlo: need at least 50 replications");
  if (grid.empty() || methods.empty())
    throw ValidationError("monte carlo: empty grid or method list");

  McReport report;
  report.n_reps = n_reps;
  report.seed = seed;
  report.delta = delta;
  report.beta_on = beta_on;
  report.kind = kind;

  for (const auto& [t0, n] : grid) {
    std::vector<std::vector<detail::RepRecord>> records(
        methods.size(),
        std::vector<detail::RepRecord>(static_cast<std::size_t>(n_reps)));

    parallel_for(
        static_cast<std::size_t>(n_reps), threads, [&](std::size_t rep) {
          const DgpParams params = DgpParams::standard(
              t0, n, beta_on, delta,
              derive_seed(seed, static_cast<std::uint64_t>(rep)));
          Panel panel;
          try {
            panel = generate(params);
          } catch (const std::exception&) {
            for (auto& rec : records) rec[rep].failed = true;
            return;
          }
          for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            detail::RepRecord& rec = records[mi][rep];
            try {
              auto [pre, full] = fit_both_samples(
                  panel, 0, detail::mc_method_spec(methods[mi]));
              rec.delta_pre = pre.effects[0];
              rec.delta_full = full.effects[0];
              rec.p_pre = resample_test(pre, kind).p_value;
              rec.p_full = resample_test(full, kind).p_value;
            } catch (const std::exception&) {
              rec.failed = true;
            }
          }
        });

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      McCell cell;
      cell.method = methods[mi];
      cell.t0 = t0;
      cell.n = n;
      std::vector<double> d_pre, d_full, p_pre, p_full;
      for (Index rep = 0; rep < n_reps; ++rep) {
        const auto& rec = records[mi][static_cast<std::size_t>(rep)];
        if (rec.failed) {
          ++cell.failures;
          continue;
        }
        d_pre.push_back(rec.delta_pre);
        d_full.push_back(rec.delta_full);
        p_pre.push_back(rec.p_pre);
        p_full.push_back(rec.p_full);
      }
      cell.n_effective = n_reps - cell.failures;
      if (cell.failures * 20 > n_reps)
        throw NumericError("monte carlo: more than 5% failed replications (" +
                           std::to_string(cell.failures) + " of " +
                           std::to_string(n_reps) + ") at cell t0=" +
                           std::to_string(t0) + ", n=" + std::to_string(n));
      cell.pre_only = detail::reduce_variant(d_pre, p_pre, delta);
      cell.full_sample = detail::reduce_variant(d_full, p_full, delta);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

struct MseRatioCell {
  Index t0 = 0;
  Index n = 0;
  double mse_farmtreat = 0.0;
  double mse_pcr = 0.0;
  double ratio = 0.0;
};

// MSE(farmtreat)/MSE(pcr) when the DGP has no cross-dependence among
// idiosyncratic components (beta = 0). Expected near 1.
inline std::vector<MseRatioCell> mse_ratio_study(
    const std::vector<std::pair<Index, Index>>& grid, Index n_reps,
    std::uint64_t seed, int threads = 1, bool beta_on = false,
    double delta = 0.0) {
  McReport rep = run_monte_carlo(grid, {Method::kFarmTreat, Method::kPcr},
                                 n_reps, seed, delta, beta_on, threads);
  std::vector<MseRatioCell> out;
  for (const auto& [t0, n] : grid) {
    MseRatioCell cell;
    cell.t0 = t0;
    cell.n = n;
    for (const auto& c : rep.cells) {
      if (c.t0 != t0 || c.n != n) continue;
      if (c.method == Method::kFarmTreat) cell.mse_farmtreat = c.pre_only.mse;
      if (c.method == Method::kPcr) cell.mse_pcr = c.pre_only.mse;
    }
    cell.ratio = cell.mse_farmtreat / cell.mse_pcr;
    out.push_back(cell);
  }
  return out;
}

}  // namespace farmtreat
