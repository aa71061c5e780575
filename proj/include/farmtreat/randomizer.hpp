#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "farmtreat/rng.hpp"
#include "farmtreat/stats.hpp"
#include "farmtreat/types.hpp"

namespace farmtreat {

// Split n units into groups of size K and n-K minimizing the mean absolute
// difference of covariate means.
struct BalanceProblem {
  Matrix covariates;  // n x J
  Index k = 1;
  bool standardize = true;

  void validate() const {
    const Index n = covariates.rows();
    if (n < 2) throw ValidationError("randomizer: need at least 2 units");
    if (covariates.cols() < 1)
      throw ValidationError("randomizer: need at least 1 covariate");
    if (k < 1 || k > n - 1)
      throw ValidationError("randomizer: infeasible group size K");
    if (!covariates.allFinite())
      throw ValidationError("randomizer: non-finite covariate");
  }
};

enum class SolveMethod { kAuto, kExhaustive, kLocalSearch };

struct Assignment {
  std::vector<int> alpha;  // 1 = group 1, 0 = group 0; sum = K
  double objective = 0.0;
  SolveMethod method = SolveMethod::kExhaustive;
  bool group1_is_treatment = true;  // fair-coin label from the seed
};

// (1/J) sum_j |group-1 mean - group-0 mean| of column j.
inline double balance_objective(const Matrix& z, const std::vector<int>& alpha) {
  const Index n = z.rows();
  const Index j_cols = z.cols();
  if (static_cast<Index>(alpha.size()) != n)
    throw ValidationError("balance_objective: alpha length mismatch");
  Index n1 = 0;
  for (int a : alpha) n1 += a != 0;
  const Index n0 = n - n1;
  if (n1 == 0 || n0 == 0)
    throw ValidationError("balance_objective: empty group");

  double total = 0.0;
  for (Index j = 0; j < j_cols; ++j) {
    double s1 = 0.0, s0 = 0.0;
    for (Index i = 0; i < n; ++i)
      (alpha[static_cast<std::size_t>(i)] ? s1 : s0) += z(i, j);
    total += std::abs(s1 / static_cast<double>(n1) -
                      s0 / static_cast<double>(n0));
  }
  return total / static_cast<double>(j_cols);
}

namespace detail {

inline Matrix standardized_covariates(const Matrix& z) {
  Matrix out = z;
  for (Index j = 0; j < z.cols(); ++j) {
    const double m = z.col(j).mean();
    const double sd = std::sqrt(
        (z.col(j).array() - m).square().sum() /
        static_cast<double>(std::max<Index>(1, z.rows() - 1)));
    if (sd <= 0.0)
      throw ValidationError(
          "randomizer: constant covariate column " + std::to_string(j) +
          " cannot be standardized");
    out.col(j) = (z.col(j).array() - m) / sd;
  }
  return out;
}

inline Assignment solve_exhaustive(const Matrix& z, Index k) {
  const Index n = z.rows();
  std::vector<Index> comb(static_cast<std::size_t>(k));
  std::iota(comb.begin(), comb.end(), 0);

  Assignment best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<int> alpha(static_cast<std::size_t>(n), 0);
  for (;;) {
    std::fill(alpha.begin(), alpha.end(), 0);
    for (Index i : comb) alpha[static_cast<std::size_t>(i)] = 1;
    const double obj = balance_objective(z, alpha);
    if (obj < best.objective) {
      best.objective = obj;
      best.alpha = alpha;
    }
    // Next K-combination in lexicographic order.
    Index pos = k - 1;
    while (pos >= 0 &&
           comb[static_cast<std::size_t>(pos)] == n - k + pos)
      --pos;
    if (pos < 0) break;
    ++comb[static_cast<std::size_t>(pos)];
    for (Index q = pos + 1; q < k; ++q)
      comb[static_cast<std::size_t>(q)] =
          comb[static_cast<std::size_t>(q - 1)] + 1;
  }
  best.method = SolveMethod::kExhaustive;
  return best;
}

// One local-search run from a random K-subset: best-improvement single
// swaps, strict acceptance, until a local optimum.
inline Assignment local_search_once(const Matrix& z, Index k, Rng& rng,
                                    const std::chrono::steady_clock::time_point* deadline) {
  const Index n = z.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (Index i = 0; i < k; ++i) {
    const Index j = i + static_cast<Index>(rng.below(
                            static_cast<std::uint64_t>(n - i)));
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(j)]);
  }
  Assignment cur;
  cur.alpha.assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < k; ++i)
    cur.alpha[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  cur.objective = balance_objective(z, cur.alpha);

  for (;;) {
    if (deadline && std::chrono::steady_clock::now() >= *deadline) break;
    double best_obj = cur.objective;
    Index best_out = -1, best_in = -1;
    for (Index i = 0; i < n; ++i) {
      if (!cur.alpha[static_cast<std::size_t>(i)]) continue;
      for (Index j = 0; j < n; ++j) {
        if (cur.alpha[static_cast<std::size_t>(j)]) continue;
        cur.alpha[static_cast<std::size_t>(i)] = 0;
        cur.alpha[static_cast<std::size_t>(j)] = 1;
        const double obj = balance_objective(z, cur.alpha);
        cur.alpha[static_cast<std::size_t>(i)] = 1;
        cur.alpha[static_cast<std::size_t>(j)] = 0;
        if (obj < best_obj) {
          best_obj = obj;
          best_out = i;
          best_in = j;
        }
      }
    }
    if (best_out < 0) break;
    cur.alpha[static_cast<std::size_t>(best_out)] = 0;
    cur.alpha[static_cast<std::size_t>(best_in)] = 1;
    cur.objective = best_obj;
  }
  cur.method = SolveMethod::kLocalSearch;
  return cur;
}

}  // namespace detail

// Exhaustive enumeration up to n = 16; multi-start swap local search
// beyond. Deterministic given the seed when no time budget is set (a
// budget may truncate restarts). Group labels are assigned by a final fair
// coin from the seed.
inline Assignment solve_balance(const BalanceProblem& problem, Index restarts,
                                std::uint64_t seed,
                                double time_budget_seconds = 0.0,
                                SolveMethod force = SolveMethod::kAuto) {
  problem.validate();
  const Matrix z = problem.standardize
                       ? detail::standardized_covariates(problem.covariates)
                       : problem.covariates;
  const Index n = z.rows();

  SolveMethod method = force;
  if (method == SolveMethod::kAuto)
    method = n <= 16 ? SolveMethod::kExhaustive : SolveMethod::kLocalSearch;

  Assignment best;
  if (method == SolveMethod::kExhaustive) {
    best = detail::solve_exhaustive(z, problem.k);
  } else {
    if (restarts < 1) throw ValidationError("randomizer: need >= 1 restart");
    std::chrono::steady_clock::time_point deadline;
    const bool budgeted = time_budget_seconds > 0.0;
    if (budgeted)
      deadline = std::chrono::steady_clock::now() +
                 std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                     std::chrono::duration<double>(time_budget_seconds));
    best.objective = std::numeric_limits<double>::infinity();
    for (Index r = 0; r < restarts; ++r) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
      Assignment cand = detail::local_search_once(
          z, problem.k, rng, budgeted ? &deadline : nullptr);
      if (cand.objective < best.objective) {
        best = std::move(cand);  // ties keep the earlier restart
      }
      if (budgeted && std::chrono::steady_clock::now() >= deadline) break;
    }
  }

  Rng coin(derive_seed(seed, 0x1abe1u));
  best.group1_is_treatment = (coin.bits() & 1u) != 0;
  return best;
}

}  // namespace farmtreat
