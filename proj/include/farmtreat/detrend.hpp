#pragma once

#include <map>
#include <string>
#include <vector>

#include "farmtreat/design.hpp"
#include "farmtreat/ols.hpp"
#include "farmtreat/panel.hpp"

namespace farmtreat {

// Step-1 residual matrix plus per-unit first-stage fits.
struct DetrendResult {
  Matrix residuals;                 // n x T
  std::vector<Vector> gammas;       // per-unit coefficients
  std::vector<Index> fit_windows;   // T* per unit (1-based count)
  std::vector<double> r_squared;
  std::vector<std::string> design_names;
};

namespace detail {

inline std::map<std::string, Vector> covariate_rows_for(const Panel& panel,
                                                        Index unit) {
  std::map<std::string, Vector> rows;
  for (const auto& c : panel.covariates)
    rows[c.name] = c.values.row(unit).transpose();
  return rows;
}

}  // namespace detail

struct UnitDetrend {
  Vector gamma;
  Vector residuals;  // over all T, using the window coefficients
  double r2 = 0.0;
};

// Fits one unit on periods [0, fit_count) and extends residuals over the
// whole sample with the fitted coefficients.
inline UnitDetrend detrend_unit(const Panel& panel, const DesignSpec& spec,
                                Index unit, Index fit_count) {
  const auto cov_rows = detail::covariate_rows_for(panel, unit);
  const DesignBuilder builder(spec, panel.time_index, {0, fit_count},
                              &cov_rows);
  const Window fit_w{0, fit_count};
  const Matrix xw = builder.rows(fit_w);
  const Vector yw = panel.outcomes.row(unit).head(fit_count).transpose();

  OlsFit fit;
  try {
    fit = ols_fit(xw, yw);
  } catch (const NumericError& e) {
    std::string msg = e.what();
    if (msg.find("rank-deficient") != std::string::npos && xw.cols() > 0) {
      const Index bad = first_dependent_column(xw);
      if (bad >= 0)
        msg += " (column '" + builder.names()[static_cast<std::size_t>(bad)] +
               "')";
    }
    throw NumericError("unit " +
                       panel.unit_ids[static_cast<std::size_t>(unit)] + ": " +
                       msg);
  }

  UnitDetrend out;
  out.gamma = fit.coef;
  out.r2 = fit.r2;
  const Vector y = panel.outcomes.row(unit).transpose();
  if (builder.n_columns() == 0) {
    out.residuals = y;
  } else {
    out.residuals = y - builder.all_rows() * fit.coef;
  }
  return out;
}

// Step 1 over the whole panel. Treated units are fitted on the pre-period
// only (unless `full_sample_treated`), controls on the full sample;
// residuals are always extended over 1..T.
inline DetrendResult detrend_panel(const Panel& panel, const DesignSpec& spec,
                                   bool full_sample_treated = false) {
  panel.validate(false);
  const Index n = panel.n_units();
  const Index t_len = panel.n_periods();

  DetrendResult res;
  res.residuals.resize(n, t_len);
  res.gammas.resize(static_cast<std::size_t>(n));
  res.fit_windows.resize(static_cast<std::size_t>(n));
  res.r_squared.resize(static_cast<std::size_t>(n));

  for (Index i = 0; i < n; ++i) {
    const bool pre_only = panel.is_treated(i) && !full_sample_treated;
    const Index fit_count = pre_only ? panel.t0 : t_len;
    if (fit_count <= 0)
      throw ValidationError("detrend: t0 unset for a treated-unit fit");
    UnitDetrend u = detrend_unit(panel, spec, i, fit_count);
    res.residuals.row(i) = u.residuals.transpose();
    res.gammas[static_cast<std::size_t>(i)] = std::move(u.gamma);
    res.fit_windows[static_cast<std::size_t>(i)] = fit_count;
    res.r_squared[static_cast<std::size_t>(i)] = u.r2;
  }

  if (n > 0) {
    const auto cov_rows = detail::covariate_rows_for(panel, 0);
    DesignBuilder b(spec, panel.time_index, {0, t_len}, &cov_rows);
    res.design_names = b.names();
  }
  return res;
}

}  // namespace farmtreat
