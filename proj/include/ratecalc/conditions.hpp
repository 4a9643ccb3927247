#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ratecalc/config.hpp"
#include "ratecalc/errors.hpp"
#include "ratecalc/extended_value.hpp"

namespace ratecalc {

enum class VerdictStatus { kHoldsEmpirically, kFailsEmpirically, kInconclusive };

inline const char* to_string(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::kHoldsEmpirically:
      return "holds_empirically";
    case VerdictStatus::kFailsEmpirically:
      return "fails_empirically";
    case VerdictStatus::kInconclusive:
      return "inconclusive";
  }
  return "?";
}

struct ConditionVerdict {
  VerdictStatus status = VerdictStatus::kInconclusive;
  std::vector<std::pair<std::int64_t, ExtendedValue>> sequence_tail;
  // slope of log(value) against log(n) over the last half of the window;
  // -inf when the tail has reached exactly zero
  double trend_slope = 0.0;
  std::string reason;

  bool holds() const noexcept { return status == VerdictStatus::kHoldsEmpirically; }
};

// Empirical test of lim_{n -> inf} seq(n) = 0 from the window [n0, N_max].
//
// The sequence is evaluated once per index in increasing order, so windows of
// 10^8 indices are fine. A tail that is exactly zero counts as vanishing.
// Otherwise the tail must decay at least like n^-vanish_slope_tol: slowly
// converging sequences such as n/(n-1) would pass a bare "negative slope"
// test while tending to a nonzero limit.
template <class Sequence>
ConditionVerdict check_vanishing(Sequence&& seq, std::int64_t n0,
                                 const TransformConfig& cfg) {
  const std::int64_t n_max = cfg.N_max;
  if (n_max < 2 * n0) throw ConfigError("check_vanishing: N_max < 2 n0");

  const std::int64_t window = n_max - n0 + 1;
  const std::int64_t half_start = n_max - (window + 1) / 2 + 1;
  const std::int64_t quarter_start = n_max - (n_max + 3) / 4 + 1;
  constexpr std::size_t kTail = 16;

  ConditionVerdict out;
  std::deque<std::pair<std::int64_t, ExtendedValue>> tail;
  bool any_non_finite = false;
  bool quarter_finite = true;
  bool non_decreasing = true;
  double first = 0.0, last = 0.0, prev = std::numeric_limits<double>::quiet_NaN();

  // running least squares of (log n, log value) over positive tail values
  long double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::int64_t m = 0;

  for (std::int64_t n = n0; n <= n_max; ++n) {
    const ExtendedValue ev = seq(n);
    tail.emplace_back(n, ev);
    if (tail.size() > kTail) tail.pop_front();
    if (!ev.is_finite()) {
      any_non_finite = true;
      if (n >= quarter_start) quarter_finite = false;
      prev = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double v = ev.value();
    if (n == n0) first = v;
    last = v;
    if (n >= half_start) {
      if (n > half_start && !(v >= prev)) non_decreasing = false;
      if (v > 0.0) {
        const long double x = std::log(static_cast<double>(n));
        const long double y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
      }
    }
    prev = v;
  }
  out.sequence_tail.assign(tail.begin(), tail.end());

  if (m >= 2) {
    const long double den = m * sxx - sx * sx;
    out.trend_slope = den > 0 ? static_cast<double>((m * sxy - sx * sy) / den) : 0.0;
  } else {
    out.trend_slope = -std::numeric_limits<double>::infinity();
  }

  if (any_non_finite) {
    out.status = VerdictStatus::kFailsEmpirically;
    out.reason = "sequence has infinite or undefined entries";
  } else if (last == 0.0) {
    out.status = VerdictStatus::kHoldsEmpirically;
    out.reason = "sequence reaches zero";
  } else if (non_decreasing) {
    out.status = VerdictStatus::kFailsEmpirically;
    out.reason = "sequence is non-decreasing over the last half";
  } else if (out.trend_slope >= -cfg.vanish_slope_tol) {
    out.status = VerdictStatus::kFailsEmpirically;
    out.reason = "tail is asymptotically flat";
  } else if (quarter_finite && last < 0.5 * first) {
    out.status = VerdictStatus::kHoldsEmpirically;
    out.reason = "tail decays";
  } else {
    out.status = VerdictStatus::kInconclusive;
    out.reason = "tail decays but has not dropped below half its initial value";
  }
  return out;
}

}  // namespace ratecalc
