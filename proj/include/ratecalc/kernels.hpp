#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "ratecalc/config.hpp"
#include "ratecalc/errors.hpp"
#include "ratecalc/extended_value.hpp"
#include "ratecalc/rate_function.hpp"

// The infimum kernels
//
//   xi1(t) = inf { r / (1 - t beta_SP(r)) : r > 0, 1 - t beta_SP(r) > 0 }
//   xi2(t) = inf { r / (t - beta_SL(r))   : r > 0, t - beta_SL(r) > 0 }
//
// with inf of the empty set reported as Undefined.
//
// Closed-form rate functions are minimised on the configured log-spaced
// r-grid. Since beta is non-increasing the feasible set is a suffix of the
// grid; it is located by bisection, the objective is scanned from there up to
// its first increase, and the bracket around the coarse minimiser is searched
// once more on a lattice ten times finer. For unimodal objectives this equals
// the minimum over the whole fine lattice, which keeps the result exactly
// monotone in t. Tabulated (step) rate functions are minimised exactly: on
// each step the objective increases with r, so only the left end points and
// the r -> 0+ limit are candidates.

namespace ratecalc {

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// `objective(log_r)` returns +inf where r is infeasible; feasibility must be
// monotone (infeasible below some r, feasible above).
template <class Objective>
ExtendedValue grid_infimum(const LogGrid& grid, Objective&& objective,
                           bool analytically_nonempty) {
  const std::int64_t n = grid.count;
  auto at = [&](std::int64_t i) { return objective(grid.log_at(i)); };

  if (!(at(n - 1) < kInf)) {
    if (analytically_nonempty) {
      throw ConfigError("r_grid upper bound too small: feasible r lie above r_max");
    }
    return ExtendedValue::undefined();
  }

  // smallest feasible index
  std::int64_t lo = -1, hi = n - 1;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (at(mid) < kInf) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const std::int64_t first = hi;

  std::int64_t best = first;
  double best_val = at(first);
  for (std::int64_t i = first + 1; i < n; ++i) {
    const double v = at(i);
    if (v > best_val) break;
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  if (best == 0) {
    throw ConfigError("r_grid lower bound too large: infimum lies below r_min");
  }

  const double h = grid.step() / 10.0;
  const double left = grid.log_at(std::max<std::int64_t>(best - 1, 0));
  const double right = grid.log_at(std::min<std::int64_t>(best + 1, n - 1));
  const int fine = static_cast<int>(std::lround((right - left) / h));
  for (int j = 0; j <= fine; ++j) {
    const double v = objective(left + static_cast<double>(j) * h);
    if (v < best_val) best_val = v;
  }
  return ExtendedValue::finite(best_val);
}

}  // namespace detail

// xi1 at t = exp(log_t). Working with log t keeps t = delta^{-n+1} usable for
// indices where t itself underflows.
inline ExtendedValue xi1_log(const RateFunction& beta_sp, double log_t,
                             const TransformConfig& cfg) {
  cfg.r_grid.validate(100);
  using detail::kInf;

  // 1 - t beta(r) = -expm1(log t + log beta(r))
  if (const auto b0 = beta_sp.limit_at_zero(); b0 && log_t + std::log(*b0) < 0.0) {
    return ExtendedValue::finite(0.0);
  }

  if (const Table* table = beta_sp.table()) {
    double best = kInf;
    const auto& s = table->s();
    const auto& v = table->values();
    for (std::size_t i = 1; i < s.size(); ++i) {
      const double e = log_t + std::log(v[i]);
      if (e < 0.0) best = std::min(best, s[i] / -std::expm1(e));
    }
    return best < kInf ? ExtendedValue::finite(best) : ExtendedValue::undefined();
  }

  const double beta_inf = beta_sp.limit_at_infinity();
  const bool nonempty = beta_inf == 0.0 || log_t + std::log(beta_inf) < 0.0;
  auto objective = [&](double log_r) {
    const double e = log_t + beta_sp.log_eval_log(log_r);
    if (!(e < 0.0)) return kInf;
    return std::exp(log_r) / -std::expm1(e);
  };
  return detail::grid_infimum(cfg.r_grid, objective, nonempty);
}

inline ExtendedValue xi1(const RateFunction& beta_sp, double t,
                         const TransformConfig& cfg) {
  if (!(t > 0.0)) throw DomainError("xi1: t must be positive");
  return xi1_log(beta_sp, std::log(t), cfg);
}

inline ExtendedValue xi2(const RateFunction& beta_sl, double t,
                         const TransformConfig& cfg) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("xi2: t must be positive");
  cfg.r_grid.validate(100);
  using detail::kInf;

  if (const auto b0 = beta_sl.limit_at_zero(); b0 && t - *b0 > 0.0) {
    return ExtendedValue::finite(0.0);
  }

  if (const Table* table = beta_sl.table()) {
    double best = kInf;
    const auto& s = table->s();
    const auto& v = table->values();
    for (std::size_t i = 1; i < s.size(); ++i) {
      const double gap = t - v[i];
      if (gap > 0.0) best = std::min(best, s[i] / gap);
    }
    return best < kInf ? ExtendedValue::finite(best) : ExtendedValue::undefined();
  }

  const bool nonempty = t > beta_sl.limit_at_infinity();
  auto objective = [&](double log_r) {
    const double gap = t - beta_sl.eval_log(log_r);
    if (!(gap > 0.0)) return kInf;
    return std::exp(log_r) / gap;
  };
  return detail::grid_infimum(cfg.r_grid, objective, nonempty);
}

}  // namespace ratecalc
