#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "farmtreat/types.hpp"

namespace farmtreat {

// Per-unit quantities feeding the linear demand line
// Q(p) = Qbar + beta * (p - pre_price), anchored at the pre-intervention
// price. avg_effect and avg_counterfactual_qty are on the same per-store
// scale.
struct PricingInputs {
  double avg_effect = 0.0;            // Delta
  double n_stores = 1.0;              // N
  double price_change = 0.0;          // Delta p (nonzero)
  double pre_price = 1.0;             // p_{T0-1}
  double avg_counterfactual_qty = 1.0;  // Qbar
  double taxes = 0.0;
  double costs = 0.0;

  void validate() const {
    if (n_stores <= 0.0) throw ValidationError("pricing: N must be positive");
    if (price_change == 0.0)
      throw ValidationError("pricing: price change must be nonzero");
    if (pre_price <= 0.0)
      throw ValidationError("pricing: pre-intervention price must be positive");
    if (avg_counterfactual_qty <= 0.0)
      throw ValidationError("pricing: average counterfactual quantity must be positive");
    if (taxes < 0.0 || taxes >= 1.0)
      throw ValidationError("pricing: taxes must be in [0,1)");
    if (costs < 0.0) throw ValidationError("pricing: costs must be nonnegative");
  }
};

// beta = Delta / (N * Delta p).
inline double demand_slope(const PricingInputs& in) {
  in.validate();
  return in.avg_effect / (in.n_stores * in.price_change);
}

// epsilon = beta * p_{T0-1} / Qbar.
inline double elasticity(const PricingInputs& in) {
  return demand_slope(in) * in.pre_price / in.avg_counterfactual_qty;
}

struct OptimalPrice {
  double price = 0.0;
  double second_derivative = 0.0;  // 2 beta (1 - taxes), negative at a max
};

// Vertex of the profit function
//   pi(p) = (1-taxes) p Q(p) - costs Q(p).
// Requires a downward-sloping demand line; a nonnegative slope means the
// screening rule should have excluded this unit.
inline OptimalPrice optimal_price(const PricingInputs& in) {
  const double beta = demand_slope(in);
  if (beta >= 0.0)
    throw ValidationError("pricing: non-negative slope: optimum undefined");
  const double net = 1.0 - in.taxes;
  OptimalPrice out;
  out.price = (net * (in.avg_counterfactual_qty - beta * in.pre_price) -
               beta * in.costs) /
              (-2.0 * beta * net);
  out.second_derivative = 2.0 * beta * net;
  return out;
}

// Revenue-maximizing price: the taxes = costs = 0 special case.
inline double revenue_price(const PricingInputs& in) {
  PricingInputs r = in;
  r.taxes = 0.0;
  r.costs = 0.0;
  return optimal_price(r).price;
}

// ---------------------------------------------------------------------------
// Significance/sign screening over fitted units.

enum class EffectDirection { kNegative, kPositive };

// A price increase should depress sales and vice versa.
inline EffectDirection expected_direction(double price_change) {
  return price_change > 0.0 ? EffectDirection::kNegative
                            : EffectDirection::kPositive;
}

inline std::string to_string(EffectDirection d) {
  return d == EffectDirection::kNegative ? "negative" : "positive";
}

struct ScreenCandidate {
  std::string unit_id;
  double avg_effect = 0.0;
  double p_value = 1.0;
};

struct ScreenResult {
  std::vector<std::size_t> kept;  // indices into the candidate list
  double fraction = 0.0;
};

// Keeps units whose estimated effect has the expected sign and is
// significant at `alpha`.
inline ScreenResult screen_units(const std::vector<ScreenCandidate>& units,
                                 double alpha, EffectDirection expected) {
  ScreenResult out;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const bool sign_ok = expected == EffectDirection::kNegative
                             ? units[i].avg_effect < 0.0
                             : units[i].avg_effect > 0.0;
    if (sign_ok && units[i].p_value <= alpha) out.kept.push_back(i);
  }
  out.fraction = units.empty() ? 0.0
                               : static_cast<double>(out.kept.size()) /
                                     static_cast<double>(units.size());
  return out;
}

}  // namespace farmtreat
