#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ratecalc/conditions.hpp"
#include "ratecalc/config.hpp"
#include "ratecalc/errors.hpp"
#include "ratecalc/extended_value.hpp"
#include "ratecalc/kernels.hpp"
#include "ratecalc/rate_function.hpp"

// Transforms between rate functions of the super-Poincare (SP), weak
// log-Sobolev (WL) and super log-Sobolev (SL) inequalities.
//
//   wl_from_sp:  beta_WL(s) = C1 min_{k >= n0, C2 k delta^-k <= s}
//                                 max_{n0 <= n <= k} n xi1(delta^{-n+1})
//   sp_from_wl:  beta_SP(s) = C3 delta^k*,  k* = min{k >= n0 :
//                    sup_{n >= k} beta_WL(delta^-n n^-theta) / n <= s}
//   sl_from_sp:  beta_SL(s) = log(delta) (1 + N0(s)),
//                    N0(s) = max{n >= n0 : C4 n xi1(delta^{-n+1}) > s}
//   sp_from_sl:  beta_SP(s) = C5 delta^k*,  k* = min{k >= n0 :
//                    xi2(k log delta) <= C6 s}
//
// Each output is tabulated on the caller's s-grid, frozen at its s0 value for
// s > s0, and passed through the monotone envelope.

namespace ratecalc {

struct TransformTable {
  std::vector<double> s;
  std::vector<double> beta;      // +inf where delta^k overflows
  std::vector<double> log_beta;  // always finite
  std::vector<std::int64_t> index;  // k*(s) or N0(s)
  std::int64_t n0 = 0;
  double s0 = 0.0;
  std::optional<ConditionVerdict> verdict;

  RateFunction rate() const {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!std::isfinite(beta[i])) {
        throw DomainError("transform output overflows a double; use log_beta");
      }
      pts.emplace_back(s[i], beta[i]);
    }
    return RateFunction::tabulated(pts);
  }
};

namespace detail {

inline void validate_s_grid(std::span<const double> s_grid) {
  if (s_grid.empty()) throw ConfigError("s-grid is empty");
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (!(s_grid[i] > 0.0) || !std::isfinite(s_grid[i])) {
      throw ConfigError("s-grid entries must be positive and finite");
    }
    if (i > 0 && !(s_grid[i] > s_grid[i - 1])) {
      throw ConfigError("s-grid must be strictly increasing");
    }
  }
}

inline double resolve_s0(std::span<const double> s_grid, const TransformConfig& cfg) {
  return cfg.s0.value_or(s_grid.back());
}

// Effective abscissae min(s, s0).
inline std::vector<double> clamped(std::span<const double> s_grid, double s0) {
  std::vector<double> out(s_grid.begin(), s_grid.end());
  for (double& x : out) x = std::min(x, s0);
  return out;
}

inline void finish(TransformTable& t) {
  for (std::size_t i = t.log_beta.size() - 1; i-- > 0;) {
    if (t.log_beta[i + 1] > t.log_beta[i]) {
      t.log_beta[i] = t.log_beta[i + 1];
      t.beta[i] = t.beta[i + 1];
    }
  }
}

inline double log_delta(const TransformConfig& cfg) { return std::log(cfg.delta); }

// xi1(delta^{-n+1})
inline ExtendedValue xi1_at_level(const RateFunction& beta_sp, std::int64_t n,
                                  const TransformConfig& cfg) {
  return xi1_log(beta_sp, -static_cast<double>(n - 1) * log_delta(cfg), cfg);
}

// Smallest n >= 2 with a positive finite kernel value, unless configured.
template <class Kernel>
std::optional<std::int64_t> first_positive_level(Kernel&& kernel, std::int64_t cap) {
  for (std::int64_t n = 2; n <= cap; ++n) {
    const ExtendedValue v = kernel(n);
    if (v.is_finite() && v.value() > 0.0) return n;
  }
  return std::nullopt;
}

template <class Kernel>
std::int64_t detect_n0(Kernel&& kernel, std::int64_t cap, const TransformConfig& cfg,
                       const char* what) {
  if (cfg.n0) return *cfg.n0;
  if (const auto n = first_positive_level(kernel, cap)) return *n;
  throw PreconditionError(std::string(what) +
                          ": no index with a positive finite kernel value");
}

// C4 n xi1(delta^{-n+1}) on [n0, N_max] with its vanishing verdict.
struct SpLevelSequence {
  std::int64_t n0 = 0;
  std::vector<double> values;  // index n - n0
  ConditionVerdict verdict;

  double at(std::int64_t n) const { return values[static_cast<std::size_t>(n - n0)]; }
};

inline SpLevelSequence sp_level_sequence(const RateFunction& beta_sp,
                                         const TransformConfig& cfg) {
  cfg.validate();
  SpLevelSequence seq;
  // a kernel that is zero at every level vanishes trivially; start at 2
  seq.n0 = cfg.n0 ? *cfg.n0
                  : first_positive_level(
                        [&](std::int64_t n) { return xi1_at_level(beta_sp, n, cfg); },
                        cfg.N_max)
                        .value_or(2);
  if (cfg.N_max < 2 * seq.n0) throw ConfigError("N_max < 2 n0");
  seq.values.reserve(static_cast<std::size_t>(cfg.N_max - seq.n0 + 1));
  std::vector<ExtendedValue> raw;
  seq.verdict = check_vanishing(
      [&](std::int64_t n) {
        const ExtendedValue x = xi1_at_level(beta_sp, n, cfg);
        if (!x.is_finite()) {
          seq.values.push_back(std::numeric_limits<double>::quiet_NaN());
          return x;
        }
        const double v = static_cast<double>(n) * x.value();
        seq.values.push_back(cfg.C4 * v);
        return ExtendedValue::finite(v);
      },
      seq.n0, cfg);
  return seq;
}

// Largest n in [n0, N_max] with sequence value > s, n0 if none.
inline std::int64_t n_zero_from(const SpLevelSequence& seq, double s,
                                const TransformConfig& cfg) {
  std::int64_t found = seq.n0;
  for (std::int64_t n = cfg.N_max; n >= seq.n0; --n) {
    if (seq.at(n) > s) {
      found = n;
      break;
    }
  }
  if (found == cfg.N_max) {
    throw CapError("N0(s) reaches N_max; increase N_max");
  }
  return found;
}

}  // namespace detail

// N0(s) = sup{n >= n0 : C4 n xi1(delta^{-n+1}) > s}, truncated at N_max.
// Requires the vanishing condition on n xi1(delta^{-n+1}) to hold.
inline std::int64_t n_zero(const RateFunction& beta_sp, double s,
                           const TransformConfig& cfg) {
  if (!(s > 0.0)) throw DomainError("n_zero: s must be positive");
  if (cfg.s0 && s > *cfg.s0) throw DomainError("n_zero: s exceeds s0");
  const auto seq = detail::sp_level_sequence(beta_sp, cfg);
  if (!seq.verdict.holds()) {
    throw PreconditionError(std::string("n_zero: vanishing condition not verified (") +
                            to_string(seq.verdict.status) + ")");
  }
  return detail::n_zero_from(seq, s, cfg);
}

inline TransformTable wl_from_sp(const RateFunction& beta_sp,
                                 std::span<const double> s_grid,
                                 const TransformConfig& cfg) {
  cfg.validate();
  detail::validate_s_grid(s_grid);
  const double s0 = detail::resolve_s0(s_grid, cfg);
  const double ld = detail::log_delta(cfg);
  auto kernel = [&](std::int64_t n) { return detail::xi1_at_level(beta_sp, n, cfg); };
  const std::int64_t n0 = detail::detect_n0(kernel, cfg.k_max, cfg, "wl_from_sp");

  const auto eff = detail::clamped(s_grid, s0);
  // smallest admissible k: log C2 + log k - k log delta <= log s
  std::vector<std::int64_t> kmin(eff.size());
  for (std::size_t i = 0; i < eff.size(); ++i) {
    const double ls = std::log(eff[i]);
    std::int64_t k = n0;
    while (std::log(cfg.C2) + std::log(static_cast<double>(k)) -
               static_cast<double>(k) * ld >
           ls) {
      if (++k > cfg.k_max) throw CapError("wl_from_sp: no admissible k <= k_max");
    }
    kmin[i] = k;
  }
  const std::int64_t top = *std::max_element(kmin.begin(), kmin.end());

  // prefix maxima of n xi1(delta^{-n+1})
  std::vector<double> prefix;
  prefix.reserve(static_cast<std::size_t>(top - n0 + 1));
  double running = 0.0;
  for (std::int64_t n = n0; n <= top; ++n) {
    const ExtendedValue x = kernel(n);
    if (!x.is_finite()) {
      throw PreconditionError("wl_from_sp: xi1(delta^{-n+1}) undefined at n = " +
                              std::to_string(n));
    }
    if (n == n0 && !(x.value() > 0.0)) {
      throw PreconditionError("wl_from_sp: xi1(delta^{-n0+1}) must be positive");
    }
    running = std::max(running, static_cast<double>(n) * x.value());
    prefix.push_back(running);
  }

  TransformTable out;
  out.n0 = n0;
  out.s0 = s0;
  out.s.assign(s_grid.begin(), s_grid.end());
  for (std::size_t i = 0; i < eff.size(); ++i) {
    const double v = cfg.C1 * prefix[static_cast<std::size_t>(kmin[i] - n0)];
    out.beta.push_back(v);
    out.log_beta.push_back(std::log(v));
    out.index.push_back(kmin[i]);
  }
  detail::finish(out);
  return out;
}

inline TransformTable sp_from_wl(const RateFunction& beta_wl,
                                 std::span<const double> s_grid,
                                 const TransformConfig& cfg) {
  cfg.validate();
  detail::validate_s_grid(s_grid);
  const double s0 = detail::resolve_s0(s_grid, cfg);
  const double ld = detail::log_delta(cfg);

  // beta_WL(delta^-n n^-theta) / n
  auto term = [&](std::int64_t n) {
    const double nd = static_cast<double>(n);
    return beta_wl.eval_log(-nd * ld - cfg.theta_cond * std::log(nd)) / nd;
  };
  auto term_ev = [&](std::int64_t n) {
    const double v = term(n);
    if (std::isnan(v)) return ExtendedValue::undefined();
    if (!std::isfinite(v)) return ExtendedValue::infinity();
    return ExtendedValue::finite(v);
  };
  const std::int64_t n0 = detail::detect_n0(term_ev, cfg.N_max, cfg, "sp_from_wl");

  const auto eff = detail::clamped(s_grid, s0);
  std::vector<double> thresholds(eff.begin(), eff.end());
  std::sort(thresholds.begin(), thresholds.end());

  // One streaming pass: the vanishing verdict and, for every threshold s,
  // the last index m with term(m) > s. last_above[j] holds the largest m seen
  // whose term exceeds exactly the j+1 smallest thresholds (or more).
  std::vector<std::int64_t> last_above(thresholds.size(), 0);
  ConditionVerdict verdict = check_vanishing(
      [&](std::int64_t n) {
        const ExtendedValue v = term_ev(n);
        const double x = v.is_finite() ? v.value() : std::numeric_limits<double>::infinity();
        const auto above = std::lower_bound(thresholds.begin(), thresholds.end(), x) -
                           thresholds.begin();
        if (above > 0) last_above[static_cast<std::size_t>(above - 1)] = n;
        return v;
      },
      n0, cfg);
  if (verdict.status == VerdictStatus::kFailsEmpirically) {
    throw ConditionError("sp_from_wl: lim beta_WL(delta^-n n^-theta)/n = 0 fails (" +
                         verdict.reason + ")");
  }
  for (std::size_t j = last_above.size() - 1; j-- > 0;) {
    last_above[j] = std::max(last_above[j], last_above[j + 1]);
  }

  // k*(s) = 1 + last index m with term(m) > s, or n0 if there is none
  std::vector<std::int64_t> kstar(eff.size(), n0);
  for (std::size_t i = 0; i < eff.size(); ++i) {
    const auto j = static_cast<std::size_t>(
        std::lower_bound(thresholds.begin(), thresholds.end(), eff[i]) - thresholds.begin());
    const std::int64_t last = last_above[j];
    if (last == cfg.N_max) throw CapError("sp_from_wl: no admissible k <= N_max");
    if (last >= n0) kstar[i] = last + 1;
  }

  TransformTable out;
  out.n0 = n0;
  out.s0 = s0;
  out.s.assign(s_grid.begin(), s_grid.end());
  for (std::size_t i = 0; i < eff.size(); ++i) {
    if (kstar[i] > cfg.k_max) throw CapError("sp_from_wl: k*(s) exceeds k_max");
    const double lb = std::log(cfg.C3) + static_cast<double>(kstar[i]) * ld;
    out.log_beta.push_back(lb);
    out.beta.push_back(std::exp(lb));
    out.index.push_back(kstar[i]);
  }
  out.verdict = std::move(verdict);
  detail::finish(out);
  return out;
}

inline TransformTable sl_from_sp(const RateFunction& beta_sp,
                                 std::span<const double> s_grid,
                                 const TransformConfig& cfg) {
  cfg.validate();
  detail::validate_s_grid(s_grid);
  const double s0 = detail::resolve_s0(s_grid, cfg);
  const auto seq = detail::sp_level_sequence(beta_sp, cfg);
  if (seq.verdict.status == VerdictStatus::kFailsEmpirically) {
    throw ConditionError("sl_from_sp: lim n xi1(delta^{-n+1}) = 0 fails (" +
                         seq.verdict.reason + ")");
  }

  const double ld = detail::log_delta(cfg);
  TransformTable out;
  out.n0 = seq.n0;
  out.s0 = s0;
  out.s.assign(s_grid.begin(), s_grid.end());
  for (double s : detail::clamped(s_grid, s0)) {
    const std::int64_t n = detail::n_zero_from(seq, s, cfg);
    const double v = ld * (1.0 + static_cast<double>(n));
    out.beta.push_back(v);
    out.log_beta.push_back(std::log(v));
    out.index.push_back(n);
  }
  out.verdict = seq.verdict;
  detail::finish(out);
  return out;
}

inline TransformTable sp_from_sl(const RateFunction& beta_sl,
                                 std::span<const double> s_grid,
                                 const TransformConfig& cfg) {
  cfg.validate();
  detail::validate_s_grid(s_grid);
  const double s0 = detail::resolve_s0(s_grid, cfg);
  const double ld = detail::log_delta(cfg);
  auto kernel = [&](std::int64_t k) {
    return xi2(beta_sl, static_cast<double>(k) * ld, cfg);
  };
  const std::int64_t n0 = detail::detect_n0(kernel, cfg.k_max, cfg, "sp_from_sl");

  const auto eff = detail::clamped(s_grid, s0);
  std::vector<std::size_t> order(eff.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // largest thresholds are admitted first
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return eff[a] > eff[b]; });

  std::vector<std::int64_t> kstar(eff.size(), 0);
  std::size_t p = 0;
  for (std::int64_t k = n0; p < order.size(); ++k) {
    if (k > cfg.k_max) throw CapError("sp_from_sl: no admissible k <= k_max");
    const ExtendedValue x = kernel(k);
    if (!x.is_finite()) continue;
    while (p < order.size() && x.value() <= cfg.C6 * eff[order[p]]) {
      kstar[order[p]] = k;
      ++p;
    }
  }

  TransformTable out;
  out.n0 = n0;
  out.s0 = s0;
  out.s.assign(s_grid.begin(), s_grid.end());
  for (std::size_t i = 0; i < eff.size(); ++i) {
    const double lb = std::log(cfg.C5) + static_cast<double>(kstar[i]) * ld;
    out.log_beta.push_back(lb);
    out.beta.push_back(std::exp(lb));
    out.index.push_back(kstar[i]);
  }
  detail::finish(out);
  return out;
}

}  // namespace ratecalc
