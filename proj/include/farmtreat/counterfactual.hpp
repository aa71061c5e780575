#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "farmtreat/detrend.hpp"
#include "farmtreat/factor.hpp"
#include "farmtreat/lasso.hpp"
#include "farmtreat/panel.hpp"

namespace farmtreat {

enum class Method { kFarmTreat, kArco, kPcr, kBeforeAfter };
enum class Sample { kPreOnly, kFullSample };

inline Method method_from_string(const std::string& s) {
  if (s == "farmtreat") return Method::kFarmTreat;
  if (s == "arco") return Method::kArco;
  if (s == "pcr") return Method::kPcr;
  if (s == "before_after") return Method::kBeforeAfter;
  throw ValidationError("unknown method: '" + s + "'");
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kFarmTreat: return "farmtreat";
    case Method::kArco: return "arco";
    case Method::kPcr: return "pcr";
    case Method::kBeforeAfter: return "before_after";
  }
  return "?";
}

inline std::string to_string(Sample s) {
  return s == Sample::kPreOnly ? "pre_only" : "full_sample";
}

struct LassoStageOptions {
  double fixed_penalty = -1.0;  // >= 0 bypasses BIC selection
  Index grid_size = 100;
};

// Which estimator to assemble, and from which sample.
struct MethodSpec {
  Method method = Method::kFarmTreat;
  Sample sample = Sample::kPreOnly;
  DesignSpec design;
  std::optional<FactorOptions> factor;
  std::optional<LassoStageOptions> lasso;

  void validate() const {
    const bool has_factor = factor.has_value();
    const bool has_lasso = lasso.has_value();
    switch (method) {
      case Method::kFarmTreat:
        break;
      case Method::kArco:
        if (has_factor)
          throw ValidationError("arco takes no factor options");
        break;
      case Method::kPcr:
        if (has_lasso)
          throw ValidationError("pcr takes no lasso options");
        break;
      case Method::kBeforeAfter:
        if (has_factor || has_lasso)
          throw ValidationError("before_after takes no factor/lasso options");
        break;
    }
  }

  FactorOptions factor_opts() const { return factor.value_or(FactorOptions{}); }
  LassoStageOptions lasso_opts() const {
    return lasso.value_or(LassoStageOptions{});
  }
};

// Assembled counterfactual for one treated unit. The three stage paths
// cover 1..T and reconstruct every derived quantity exactly:
//   fitted_t  = w_path + factor_path + idio_path
//   delta_t   = Z_1t - fitted_t   (post periods)
//   V_t       = Z_1t - fitted_t   (pre periods)
struct CounterfactualFit {
  std::string unit_id;
  Method method = Method::kFarmTreat;
  Sample sample = Sample::kPreOnly;
  Index t0 = 0;
  Index n_periods = 0;

  Vector gamma1;
  Vector lambda1;
  Vector theta1;  // aligned with control_ids

  Vector w_path;       // gamma_1' W_1t over 1..T (before_after: pre mean)
  Vector factor_path;  // lambda_1' F_t over 1..T
  Vector idio_path;    // theta_1' U_{-1,t} (arco: theta_1' R_{-1,t})

  Vector counterfactual_path;  // over t0+1..T
  Vector effects;              // delta_t over t0+1..T
  double avg_effect = 0.0;
  Vector pre_residuals;  // V_t over 1..t0

  double r2 = 0.0;  // pre-intervention model fit on the treated unit
  Index factor_rank = 0;
  std::vector<Index> active_set;  // indices into control_ids
  double penalty = 0.0;
  std::vector<std::string> control_ids;
};

inline double avg_effect(const CounterfactualFit& fit) {
  if (fit.effects.size() < 1)
    throw ValidationError("avg_effect: no post periods");
  return fit.effects.mean();
}

namespace detail {

// The treated unit plus every untreated peer, in panel order. All other
// treated units are excluded from the control pool.
struct SubProblem {
  Panel sub;
  Index treated_pos = 0;
  std::vector<std::string> control_ids;
};

inline SubProblem make_subproblem(const Panel& panel, Index treated_unit) {
  SubProblem sp;
  std::vector<Index> keep;
  for (Index i = 0; i < panel.n_units(); ++i)
    if (i == treated_unit || !panel.is_treated(i)) keep.push_back(i);
  const Index n = static_cast<Index>(keep.size());
  if (n < 2)
    throw ValidationError("fit: no untreated peers available");

  sp.sub.outcomes.resize(n, panel.n_periods());
  for (Index k = 0; k < n; ++k) {
    sp.sub.outcomes.row(k) = panel.outcomes.row(keep[static_cast<std::size_t>(k)]);
    sp.sub.unit_ids.push_back(
        panel.unit_ids[static_cast<std::size_t>(keep[static_cast<std::size_t>(k)])]);
  }
  sp.sub.time_index = panel.time_index;
  sp.sub.t0 = panel.t0;
  for (const auto& c : panel.covariates) {
    Matrix v(n, panel.n_periods());
    for (Index k = 0; k < n; ++k)
      v.row(k) = c.values.row(keep[static_cast<std::size_t>(k)]);
    sp.sub.covariates.push_back({c.name, std::move(v)});
  }
  for (Index k = 0; k < n; ++k) {
    if (keep[static_cast<std::size_t>(k)] == treated_unit) {
      sp.treated_pos = k;
    } else {
      sp.control_ids.push_back(sp.sub.unit_ids[static_cast<std::size_t>(k)]);
    }
  }
  sp.sub.treated_units = {sp.treated_pos};
  sp.sub.validate(true);
  return sp;
}

// Variant-independent stage work for one treated unit.
struct FitEngine {
  SubProblem sp;
  MethodSpec spec;
  DetrendResult dt_pre;            // treated row fitted on 1..t0
  Vector treated_resid_full;       // treated row fitted on 1..T
  Vector treated_gamma_full;
  double treated_r2_full = 0.0;
  std::optional<ControlFactorCore> core;  // exclude_treated sharing

  FitEngine(const Panel& panel, Index treated_unit, MethodSpec s)
      : sp(make_subproblem(panel, treated_unit)), spec(std::move(s)) {
    spec.validate();
    if (spec.method == Method::kBeforeAfter) return;

    dt_pre = detrend_panel(sp.sub, spec.design, false);
    UnitDetrend full = detrend_unit(sp.sub, spec.design, sp.treated_pos,
                                    sp.sub.n_periods());
    treated_resid_full = std::move(full.residuals);
    treated_gamma_full = std::move(full.gamma);
    treated_r2_full = full.r2;

    const bool needs_factor = spec.method == Method::kFarmTreat ||
                              spec.method == Method::kPcr;
    if (needs_factor &&
        spec.factor_opts().strategy == FactorStrategy::kExcludeTreated) {
      const Index n = sp.sub.n_units();
      Matrix ctrl(n - 1, sp.sub.n_periods());
      Index row = 0;
      for (Index i = 0; i < n; ++i)
        if (i != sp.treated_pos) ctrl.row(row++) = dt_pre.residuals.row(i);
      core = factor_core_from_controls(ctrl, spec.factor_opts());
    }
  }

  CounterfactualFit assemble(Sample sample) const {
    const Panel& sub = sp.sub;
    const Index t_len = sub.n_periods();
    const Index t0 = sub.t0;
    const Index fit_count = sample == Sample::kFullSample ? t_len : t0;
    const Vector z1 = sub.outcomes.row(sp.treated_pos).transpose();

    CounterfactualFit out;
    out.unit_id = sub.unit_ids[static_cast<std::size_t>(sp.treated_pos)];
    out.method = spec.method;
    out.sample = sample;
    out.t0 = t0;
    out.n_periods = t_len;
    out.control_ids = sp.control_ids;
    out.w_path = Vector::Zero(t_len);
    out.factor_path = Vector::Zero(t_len);
    out.idio_path = Vector::Zero(t_len);

    if (spec.method == Method::kBeforeAfter) {
      out.w_path.setConstant(z1.head(t0).mean());
    } else {
      // Residual matrix for this variant: only the treated row differs.
      Matrix resid = dt_pre.residuals;
      if (sample == Sample::kFullSample) {
        resid.row(sp.treated_pos) = treated_resid_full.transpose();
        out.gamma1 = treated_gamma_full;
      } else {
        out.gamma1 = dt_pre.gammas[static_cast<std::size_t>(sp.treated_pos)];
      }
      out.w_path = z1 - resid.row(sp.treated_pos).transpose();

      const Index n = sub.n_units();
      const Index m = n - 1;

      if (spec.method == Method::kArco) {
        Matrix x(fit_count, m);
        Matrix x_all(t_len, m);
        Index col = 0;
        for (Index i = 0; i < n; ++i) {
          if (i == sp.treated_pos) continue;
          x_all.col(col) = resid.row(i).transpose();
          x.col(col) = x_all.col(col).head(fit_count);
          ++col;
        }
        const Vector y = resid.row(sp.treated_pos).head(fit_count).transpose();
        run_lasso(x, y, &out);
        out.idio_path = x_all * out.theta1;
      } else {
        FactorFit ff = fit_factor_stage(
            resid, sp.treated_pos, t0, spec.factor_opts(), fit_count,
            core ? &*core : nullptr);
        out.factor_rank = ff.rank;
        out.lambda1 = ff.loadings.row(sp.treated_pos).transpose();
        out.factor_path = ff.factors * out.lambda1;

        if (spec.method == Method::kFarmTreat) {
          Matrix x(fit_count, m);
          Matrix x_all(t_len, m);
          Index col = 0;
          for (Index i = 0; i < n; ++i) {
            if (i == sp.treated_pos) continue;
            x_all.col(col) = ff.idios.row(i).transpose();
            x.col(col) = x_all.col(col).head(fit_count);
            ++col;
          }
          const Vector y =
              ff.idios.row(sp.treated_pos).head(fit_count).transpose();
          run_lasso(x, y, &out);
          out.idio_path = x_all * out.theta1;
        } else {
          out.theta1 = Vector::Zero(m);
        }
      }
    }

    const Vector fitted = out.w_path + out.factor_path + out.idio_path;
    out.counterfactual_path = fitted.tail(t_len - t0);
    out.effects = z1.tail(t_len - t0) - out.counterfactual_path;
    out.avg_effect = out.effects.mean();
    out.pre_residuals = z1.head(t0) - fitted.head(t0);

    const double ybar = z1.head(t0).mean();
    const double tss = (z1.head(t0).array() - ybar).matrix().squaredNorm();
    const double rss = out.pre_residuals.squaredNorm();
    out.r2 = tss > 0.0 ? 1.0 - rss / tss : 0.0;
    return out;
  }

 private:
  void run_lasso(const Matrix& x, const Vector& y,
                 CounterfactualFit* out) const {
    const LassoStageOptions lo = spec.lasso_opts();
    try {
      if (lo.fixed_penalty >= 0.0) {
        LassoFit fit = lasso_fit(x, y, lo.fixed_penalty);
        out->theta1 = fit.theta;
        out->active_set = fit.active_set;
        out->penalty = fit.penalty;
      } else {
        LassoPath path = select_penalty_bic(x, y, lo.grid_size);
        out->theta1 = path.best.theta;
        out->active_set = path.best.active_set;
        out->penalty = path.xi_star;
      }
    } catch (const NumericError& e) {
      throw NumericError("lasso stage: " + std::string(e.what()));
    }
  }
};

}  // namespace detail

// Fits one treated unit. The panel must contain exactly one treated unit;
// multi-treated panels go through fit_all.
inline CounterfactualFit fit(const Panel& panel, const MethodSpec& spec) {
  panel.validate(true);
  if (panel.treated_units.size() != 1)
    throw ValidationError(
        "fit: exactly one treated unit per fit; use fit_all for " +
        std::to_string(panel.treated_units.size()) + " treated units");
  detail::FitEngine engine(panel, panel.treated_units.front(), spec);
  return engine.assemble(spec.sample);
}

// Fits the given treated unit of a (possibly multi-treated) panel.
inline CounterfactualFit fit_unit(const Panel& panel, Index treated_unit,
                                  const MethodSpec& spec) {
  panel.validate(true);
  if (!panel.is_treated(treated_unit))
    throw ValidationError("fit_unit: unit is not treated");
  detail::FitEngine engine(panel, treated_unit, spec);
  return engine.assemble(spec.sample);
}

// Both sample variants of the same fit, sharing the control-side stages
// (identical between variants by construction).
inline std::pair<CounterfactualFit, CounterfactualFit> fit_both_samples(
    const Panel& panel, Index treated_unit, const MethodSpec& spec) {
  panel.validate(true);
  detail::FitEngine engine(panel, treated_unit, spec);
  return {engine.assemble(Sample::kPreOnly),
          engine.assemble(Sample::kFullSample)};
}

}  // namespace farmtreat
