#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "farmtreat/types.hpp"

namespace farmtreat {

// Neumaier compensated sum; order-stable aggregation for Monte Carlo
// reductions.
inline double compensated_sum(std::span<const double> xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return compensated_sum(xs) / static_cast<double>(xs.size());
}

inline double median_of(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  const std::size_t n = xs.size();
  std::sort(xs.begin(), xs.end());
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Type-7 (linear interpolation) quantile of already-meaningful data.
inline double quantile_of(std::vector<double> xs, double q) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  if (q <= 0.0) return xs.front();
  if (q >= 1.0) return xs.back();
  const double pos = q * static_cast<double>(xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= xs.size()) return xs.back();
  return xs[lo] * (1.0 - frac) + xs[lo + 1] * frac;
}

inline double sample_sd(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  const double m = mean_of(xs);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (xs[i] - m) * (xs[i] - m);
  return std::sqrt(compensated_sum(sq) / static_cast<double>(n - 1));
}

}  // namespace farmtreat
