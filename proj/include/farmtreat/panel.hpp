#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "farmtreat/csv.hpp"
#include "farmtreat/types.hpp"

namespace farmtreat {

enum class MissingPolicy { kReject, kZeroFill, kDropUnit };

inline MissingPolicy missing_policy_from_string(const std::string& s) {
  if (s == "reject") return MissingPolicy::kReject;
  if (s == "zero_fill") return MissingPolicy::kZeroFill;
  if (s == "drop_unit") return MissingPolicy::kDropUnit;
  throw ValidationError("unknown missing policy: '" + s + "'");
}

// One named covariate observed per unit and period.
struct Covariate {
  std::string name;
  Matrix values;  // n_units x T

  bool operator==(const Covariate& o) const {
    return name == o.name && values == o.values;
  }
};

// Rectangular unit x time outcome panel with treatment metadata. Immutable
// after construction; safe to share read-only across workers.
struct Panel {
  Matrix outcomes;  // n_units x T
  std::vector<std::string> unit_ids;
  TimeIndex time_index;
  std::vector<Covariate> covariates;
  std::vector<Index> treated_units;  // sorted unit indices
  Index t0 = 0;                      // last pre-intervention period, 1-based
  long n_filled = 0;                 // cells replaced under zero_fill

  Index n_units() const { return outcomes.rows(); }
  Index n_periods() const { return outcomes.cols(); }
  Index pre_periods() const { return t0; }
  Index post_periods() const { return n_periods() - t0; }

  bool is_treated(Index unit) const {
    return std::binary_search(treated_units.begin(), treated_units.end(),
                              unit);
  }

  const Covariate* find_covariate(const std::string& name) const {
    for (const auto& c : covariates)
      if (c.name == name) return &c;
    return nullptr;
  }

  // Structural checks; `for_estimation` adds the treatment-run invariants.
  void validate(bool for_estimation = false) const {
    const Index n = n_units(), t = n_periods();
    if (n == 0 || t == 0) throw ValidationError("panel: empty outcome matrix");
    if (static_cast<Index>(unit_ids.size()) != n)
      throw ValidationError("panel: unit_ids length mismatch");
    if (time_index.size() != t)
      throw ValidationError("panel: time index length mismatch");
    if (!time_index.strictly_increasing())
      throw ValidationError("panel: time index not strictly increasing");
    if (!outcomes.allFinite())
      throw ValidationError("panel: non-finite outcome");
    if (!std::is_sorted(unit_ids.begin(), unit_ids.end()))
      throw ValidationError("panel: unit_ids not sorted");
    if (std::adjacent_find(unit_ids.begin(), unit_ids.end()) != unit_ids.end())
      throw ValidationError("panel: duplicate unit id");
    for (const auto& c : covariates) {
      if (c.values.rows() != n || c.values.cols() != t)
        throw ValidationError("panel: covariate '" + c.name +
                              "' has wrong shape");
      if (!c.values.allFinite())
        throw ValidationError("panel: non-finite covariate '" + c.name + "'");
    }
    for (Index u : treated_units)
      if (u < 0 || u >= n)
        throw ValidationError("panel: treated unit index out of range");
    if (!std::is_sorted(treated_units.begin(), treated_units.end()) ||
        std::adjacent_find(treated_units.begin(), treated_units.end()) !=
            treated_units.end())
      throw ValidationError("panel: treated_units not a sorted set");
    if (for_estimation) {
      if (!(1 < t0 && t0 < t))
        throw ValidationError("panel: t0 must satisfy 1 < t0 < T (t0=" +
                              std::to_string(t0) + ", T=" + std::to_string(t) +
                              ")");
      if (treated_units.empty())
        throw ValidationError("panel: no treated units");
      if (static_cast<Index>(treated_units.size()) >= n)
        throw ValidationError(
            "panel: treated units must be a strict subset of all units");
    }
  }

  bool operator==(const Panel& o) const {
    return outcomes == o.outcomes && unit_ids == o.unit_ids &&
           time_index == o.time_index && covariates == o.covariates &&
           treated_units == o.treated_units && t0 == o.t0;
  }
};

// Column mapping plus treatment metadata for long-format CSV loading.
struct PanelSchema {
  std::string unit_col = "unit";
  std::string time_col = "time";
  std::string outcome_col = "value";
  std::vector<std::string> covariate_cols;
  std::vector<std::string> treated_ids;
  std::string t0_label;  // period number or ISO date; empty = unset
};

namespace detail {

inline std::string time_tag(const TimeIndex& ti, Index pos) {
  return ti.has_dates() ? ti.label(pos) : "t" + ti.label(pos);
}

inline bool parse_long(const std::string& s, long& out) {
  try {
    std::size_t pos = 0;
    out = std::stol(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace detail

// Loads a long-format CSV (unit,time,value[,covariate...]). Unit order in
// the result is a pure function of the unit ids (sorted), so shuffled
// files load identically.
inline Panel load_panel(const std::string& path, const PanelSchema& schema,
                        MissingPolicy policy = MissingPolicy::kReject) {
  const auto rows = read_csv_file(path);
  if (rows.size() < 2) throw ValidationError(path + ": no data rows");

  const auto& header = rows.front();
  auto col_of = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw ValidationError(path + ": missing column '" + name + "'");
  };
  const std::size_t uc = col_of(schema.unit_col);
  const std::size_t tc = col_of(schema.time_col);
  const std::size_t vc = col_of(schema.outcome_col);
  std::vector<std::size_t> cc;
  for (const auto& name : schema.covariate_cols) cc.push_back(col_of(name));

  // First pass: collect the unit and time axes.
  std::set<std::string> unit_set;
  std::vector<std::string> time_raw;
  std::set<std::string> time_seen;
  bool all_int = true;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size())
      throw ValidationError(path + ": row " + std::to_string(r + 1) +
                            " has wrong field count");
    unit_set.insert(rows[r][uc]);
    const std::string& t = rows[r][tc];
    if (time_seen.insert(t).second) time_raw.push_back(t);
    long dummy;
    if (!detail::parse_long(t, dummy)) all_int = false;
  }

  TimeIndex ti;
  if (all_int) {
    std::vector<long> periods;
    for (const auto& s : time_raw) {
      long v;
      detail::parse_long(s, v);
      periods.push_back(v);
    }
    std::sort(periods.begin(), periods.end());
    ti = TimeIndex(std::move(periods));
  } else {
    std::vector<Date> dates;
    for (const auto& s : time_raw) dates.push_back(Date::parse(s));
    std::sort(dates.begin(), dates.end());
    ti = TimeIndex(std::move(dates));
  }
  if (!ti.strictly_increasing())
    throw ValidationError(path + ": duplicate time value");

  std::vector<std::string> unit_ids(unit_set.begin(), unit_set.end());
  const Index n = static_cast<Index>(unit_ids.size());
  const Index t_len = ti.size();
  std::map<std::string, Index> unit_pos;
  for (Index i = 0; i < n; ++i) unit_pos[unit_ids[static_cast<std::size_t>(i)]] = i;

  const double kMissing = std::numeric_limits<double>::quiet_NaN();
  Matrix outcomes = Matrix::Constant(n, t_len, kMissing);
  std::vector<Covariate> covs;
  for (const auto& name : schema.covariate_cols)
    covs.push_back({name, Matrix::Constant(n, t_len, kMissing)});

  // Second pass: fill cells.
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const Index i = unit_pos.at(rows[r][uc]);
    const Index t = ti.find(rows[r][tc]);
    const std::string& raw = rows[r][vc];
    if (!raw.empty()) {
      if (!std::isnan(outcomes(i, t)))
        throw ValidationError(path + ": duplicate cell (" + rows[r][uc] +
                              ", " + detail::time_tag(ti, t) + ")");
      outcomes(i, t) = parse_double(raw);
    }
    for (std::size_t k = 0; k < cc.size(); ++k) {
      const std::string& craw = rows[r][cc[k]];
      if (craw.empty())
        throw ValidationError(path + ": empty covariate '" +
                              schema.covariate_cols[k] + "' at (" +
                              rows[r][uc] + ", " + detail::time_tag(ti, t) +
                              ")");
      covs[k].values(i, t) = parse_double(craw);
    }
  }

  // Missing policy. zero_fill touches only explicitly-missing cells.
  long filled = 0;
  std::vector<Index> dropped;
  for (Index i = 0; i < n; ++i) {
    bool unit_has_missing = false;
    for (Index t = 0; t < t_len; ++t) {
      if (!std::isnan(outcomes(i, t))) continue;
      unit_has_missing = true;
      switch (policy) {
        case MissingPolicy::kReject:
          throw ValidationError(
              path + ": missing cell (" + unit_ids[static_cast<std::size_t>(i)] +
              ", " + detail::time_tag(ti, t) + ")");
        case MissingPolicy::kZeroFill:
          outcomes(i, t) = 0.0;
          ++filled;
          break;
        case MissingPolicy::kDropUnit:
          break;
      }
    }
    if (unit_has_missing && policy == MissingPolicy::kDropUnit)
      dropped.push_back(i);
  }
  // Covariate gaps on surviving units follow the same fate as outcomes.
  for (auto& c : covs) {
    for (Index i = 0; i < n; ++i) {
      if (std::binary_search(dropped.begin(), dropped.end(), i)) continue;
      for (Index t = 0; t < t_len; ++t) {
        if (!std::isnan(c.values(i, t))) continue;
        if (policy == MissingPolicy::kZeroFill) {
          c.values(i, t) = 0.0;
        } else {
          throw ValidationError(path + ": missing covariate '" + c.name +
                                "' at (" +
                                unit_ids[static_cast<std::size_t>(i)] + ", " +
                                detail::time_tag(ti, t) + ")");
        }
      }
    }
  }

  Panel p;
  p.time_index = ti;
  p.n_filled = filled;
  if (dropped.empty()) {
    p.outcomes = std::move(outcomes);
    p.unit_ids = std::move(unit_ids);
    p.covariates = std::move(covs);
  } else {
    if (static_cast<Index>(dropped.size()) == n)
      throw ValidationError(path + ": all units dropped by missing policy");
    const Index kept = n - static_cast<Index>(dropped.size());
    p.outcomes.resize(kept, t_len);
    Index out = 0;
    for (Index i = 0; i < n; ++i) {
      if (std::binary_search(dropped.begin(), dropped.end(), i)) continue;
      p.outcomes.row(out) = outcomes.row(i);
      p.unit_ids.push_back(unit_ids[static_cast<std::size_t>(i)]);
      ++out;
    }
    for (auto& c : covs) {
      Matrix m(kept, t_len);
      Index o = 0;
      for (Index i = 0; i < n; ++i) {
        if (std::binary_search(dropped.begin(), dropped.end(), i)) continue;
        m.row(o++) = c.values.row(i);
      }
      p.covariates.push_back({c.name, std::move(m)});
    }
  }

  for (const auto& id : schema.treated_ids) {
    auto it = std::lower_bound(p.unit_ids.begin(), p.unit_ids.end(), id);
    if (it == p.unit_ids.end() || *it != id)
      throw ValidationError(path + ": treated unit '" + id +
                            "' not in panel");
    p.treated_units.push_back(
        static_cast<Index>(it - p.unit_ids.begin()));
  }
  std::sort(p.treated_units.begin(), p.treated_units.end());
  p.treated_units.erase(
      std::unique(p.treated_units.begin(), p.treated_units.end()),
      p.treated_units.end());

  if (!schema.t0_label.empty()) {
    const Index pos = p.time_index.find(schema.t0_label);
    if (pos < 0)
      throw ValidationError(path + ": t0 '" + schema.t0_label +
                            "' not in time index");
    p.t0 = pos + 1;  // 1-based count of pre periods
  }

  p.validate(false);
  return p;
}

// Long-format writer; %.17g makes save/load lossless for finite values.
inline void save_panel(const Panel& panel, const std::string& path,
                       const PanelSchema& schema = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  std::vector<std::string> header = {schema.unit_col, schema.time_col,
                                     schema.outcome_col};
  for (const auto& c : panel.covariates) header.push_back(c.name);
  write_csv_row(out, header);
  for (Index i = 0; i < panel.n_units(); ++i) {
    for (Index t = 0; t < panel.n_periods(); ++t) {
      std::vector<std::string> row = {
          panel.unit_ids[static_cast<std::size_t>(i)], panel.time_index.label(t),
          format_double(panel.outcomes(i, t))};
      for (const auto& c : panel.covariates)
        row.push_back(format_double(c.values(i, t)));
      write_csv_row(out, row);
    }
  }
}

// Per-store normalization: outcomes divided elementwise by store counts.
inline Panel per_store_normalize(const Panel& panel,
                                 const Matrix& store_counts) {
  if (store_counts.rows() != panel.n_units() ||
      store_counts.cols() != panel.n_periods())
    throw ValidationError("store_counts shape mismatch");
  Panel out = panel;
  for (Index i = 0; i < panel.n_units(); ++i) {
    for (Index t = 0; t < panel.n_periods(); ++t) {
      const double q = panel.outcomes(i, t);
      const double s = store_counts(i, t);
      if (s <= 0.0) {
        if (q != 0.0)
          throw ValidationError(
              "zero store count with nonzero sales at (" +
              panel.unit_ids[static_cast<std::size_t>(i)] + ", " +
              detail::time_tag(panel.time_index, t) + ")");
        out.outcomes(i, t) = 0.0;
      } else {
        out.outcomes(i, t) = q / s;
      }
    }
  }
  return out;
}

}  // namespace farmtreat
