#pragma once

#include <map>
#include <string>
#include <vector>

#include "farmtreat/types.hpp"

namespace farmtreat {

// Named 0/1 column aligned with the full time index.
struct CustomDummy {
  std::string name;
  std::vector<int> values;
};

// First-stage regressors. Column order is fixed: intercept, trend,
// weekday dummies (Mon..Sat, Sunday omitted), custom dummies, extra
// covariates.
struct DesignSpec {
  bool intercept = false;
  bool linear_trend = false;
  bool weekday_dummies = false;
  std::vector<CustomDummy> custom_dummies;
  std::vector<std::string> extra_covariates;

  Index n_columns() const {
    return (intercept ? 1 : 0) + (linear_trend ? 1 : 0) +
           (weekday_dummies ? 6 : 0) +
           static_cast<Index>(custom_dummies.size()) +
           static_cast<Index>(extra_covariates.size());
  }
};

// Half-open window of time positions [begin, end), 0-based.
struct Window {
  Index begin = 0;
  Index end = 0;
  Index size() const { return end - begin; }
};

// Materializes design rows for one unit. The trend column is anchored to
// the fit window: (position - mean(window positions)) / |window|, so
// rows evaluated outside the window (post-period prediction) stay on the
// same basis the coefficients were fit on.
class DesignBuilder {
 public:
  DesignBuilder(const DesignSpec& spec, const TimeIndex& time_index,
                Window anchor,
                const std::map<std::string, Vector>* covariate_rows = nullptr) {
    const Index t_len = time_index.size();
    if (anchor.begin < 0 || anchor.end > t_len || anchor.size() <= 0)
      throw ValidationError("design: empty or out-of-range window");
    if (spec.weekday_dummies && !time_index.has_dates())
      throw ValidationError(
          "design: weekday dummies require a date-valued time index");

    const Index k = spec.n_columns();
    full_.resize(t_len, k);
    Index col = 0;
    if (spec.intercept) {
      full_.col(col).setOnes();
      names_.push_back("intercept");
      ++col;
    }
    if (spec.linear_trend) {
      // 1-based positions centered on the anchor window.
      double mean_pos = 0.5 * static_cast<double>(anchor.begin + 1 + anchor.end);
      const double scale = static_cast<double>(anchor.size());
      for (Index t = 0; t < t_len; ++t)
        full_(t, col) = (static_cast<double>(t + 1) - mean_pos) / scale;
      names_.push_back("trend");
      ++col;
    }
    if (spec.weekday_dummies) {
      static const char* kDay[6] = {"weekday_mon", "weekday_tue",
                                    "weekday_wed", "weekday_thu",
                                    "weekday_fri", "weekday_sat"};
      const auto& dates = time_index.dates();
      for (int d = 0; d < 6; ++d) {
        for (Index t = 0; t < t_len; ++t)
          full_(t, col) =
              dates[static_cast<std::size_t>(t)].weekday() == d ? 1.0 : 0.0;
        names_.push_back(kDay[d]);
        ++col;
      }
    }
    for (const auto& dummy : spec.custom_dummies) {
      if (static_cast<Index>(dummy.values.size()) != t_len)
        throw ValidationError("design: dummy '" + dummy.name +
                              "' length mismatch");
      for (Index t = 0; t < t_len; ++t) {
        const int v = dummy.values[static_cast<std::size_t>(t)];
        if (v != 0 && v != 1)
          throw ValidationError("design: dummy '" + dummy.name +
                                "' is not 0/1");
        full_(t, col) = v;
      }
      names_.push_back(dummy.name);
      ++col;
    }
    for (const auto& name : spec.extra_covariates) {
      if (covariate_rows == nullptr || !covariate_rows->count(name))
        throw ValidationError("design: covariate '" + name +
                              "' not available");
      const Vector& v = covariate_rows->at(name);
      if (v.size() != t_len)
        throw ValidationError("design: covariate '" + name +
                              "' length mismatch");
      full_.col(col) = v;
      names_.push_back(name);
      ++col;
    }
  }

  Index n_columns() const { return full_.cols(); }
  const std::vector<std::string>& names() const { return names_; }

  // Design rows over [w.begin, w.end).
  Matrix rows(Window w) const {
    return full_.middleRows(w.begin, w.size());
  }

  const Matrix& all_rows() const { return full_; }

 private:
  Matrix full_;  // T x k
  std::vector<std::string> names_;
};

// Design matrix over a window, anchored to that same window.
inline Matrix build_design(
    const DesignSpec& spec, const TimeIndex& time_index, Window window,
    const std::map<std::string, Vector>* covariate_rows = nullptr) {
  DesignBuilder b(spec, time_index, window, covariate_rows);
  return b.rows(window);
}

}  // namespace farmtreat
