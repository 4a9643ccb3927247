#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ratecalc/errors.hpp"

namespace ratecalc {

namespace detail {

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace detail

// s -> exp(C (1 + s^-theta))
struct ExpPower {
  double C;
  double theta;
};

// s -> C (1 + s^-p)
struct PolyPower {
  double C;
  double p;
};

// s -> C (1 + log^q(1 + 1/s))
struct LogPower {
  double C;
  double q;
};

// s -> a s^-p
struct InversePower {
  double a;
  double p;
};

struct Constant {
  double B;
};

// Non-increasing step function on a finite grid. Between grid points the
// value of the left neighbour is used, so the step function dominates any
// non-increasing function agreeing with it on the grid. Outside the grid the
// end values are extended as constants.
class Table {
 public:
  Table() = default;

  // Points must be strictly increasing in s with nonnegative values. The
  // stored values are the monotone envelope of the input.
  explicit Table(std::span<const std::pair<double, double>> points) {
    if (points.empty()) throw InputError("rate table needs at least one point");
    s_.reserve(points.size());
    values_.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto [s, v] = points[i];
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw InputError("rate table abscissae must be positive and finite");
      }
      if (i > 0 && !(s > s_.back())) {
        throw InputError("rate table abscissae must be strictly increasing");
      }
      if (!(v >= 0.0)) throw InputError("rate table values must be nonnegative");
      s_.push_back(s);
      values_.push_back(v);
    }
    // running maximum from the right
    for (std::size_t i = values_.size() - 1; i-- > 0;) {
      values_[i] = std::max(values_[i], values_[i + 1]);
    }
    log_s_.resize(s_.size());
    std::transform(s_.begin(), s_.end(), log_s_.begin(),
                   [](double s) { return std::log(s); });
  }

  const std::vector<double>& s() const noexcept { return s_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return s_.size(); }

  std::size_t index_at_log(double log_s) const {
    auto it = std::upper_bound(log_s_.begin(), log_s_.end(), log_s);
    if (it == log_s_.begin()) return 0;
    return static_cast<std::size_t>(it - log_s_.begin()) - 1;
  }

  double eval_log(double log_s) const { return values_[index_at_log(log_s)]; }

 private:
  std::vector<double> s_;
  std::vector<double> log_s_;
  std::vector<double> values_;
};

class RateFunction {
 public:
  using Variant =
      std::variant<ExpPower, PolyPower, LogPower, InversePower, Constant, Table>;

  static RateFunction exp_power(double C, double theta) {
    require(C > 0.0, "exp_power: C must be positive");
    require(theta >= 0.5, "exp_power: theta must be >= 1/2");
    return RateFunction(ExpPower{C, theta});
  }
  static RateFunction poly_power(double C, double p) {
    require(C > 0.0 && p > 0.0, "poly_power: C and p must be positive");
    return RateFunction(PolyPower{C, p});
  }
  static RateFunction log_power(double C, double q) {
    require(C > 0.0 && q >= 0.0, "log_power: C > 0 and q >= 0 required");
    return RateFunction(LogPower{C, q});
  }
  static RateFunction inverse_power(double a, double p) {
    require(a > 0.0 && p > 0.0, "inverse_power: a and p must be positive");
    return RateFunction(InversePower{a, p});
  }
  static RateFunction constant(double B) {
    require(B > 0.0, "constant: B must be positive");
    return RateFunction(Constant{B});
  }
  static RateFunction tabulated(std::span<const std::pair<double, double>> points) {
    return RateFunction(Table(points));
  }

  const Variant& variant() const noexcept { return v_; }
  const Table* table() const noexcept { return std::get_if<Table>(&v_); }
  bool is_closed_form() const noexcept { return table() == nullptr; }

  double eval(double s) const {
    if (!(s > 0.0)) throw DomainError("rate function evaluated at s <= 0");
    return eval_log(std::log(s));
  }
  double operator()(double s) const { return eval(s); }

  // Value at s = exp(log_s); usable where s itself underflows.
  double eval_log(double log_s) const {
    return std::visit(
        [log_s](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ExpPower>) {
            return std::exp(f.C * (1.0 + std::exp(-f.theta * log_s)));
          } else if constexpr (std::is_same_v<T, PolyPower>) {
            return f.C * (1.0 + std::exp(-f.p * log_s));
          } else if constexpr (std::is_same_v<T, LogPower>) {
            return f.C * (1.0 + std::pow(detail::softplus(-log_s), f.q));
          } else if constexpr (std::is_same_v<T, InversePower>) {
            return f.a * std::exp(-f.p * log_s);
          } else if constexpr (std::is_same_v<T, Constant>) {
            return f.B;
          } else {
            return f.eval_log(log_s);
          }
        },
        v_);
  }

  // log of the value at s = exp(log_s); finite where eval_log overflows.
  double log_eval_log(double log_s) const {
    return std::visit(
        [log_s](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ExpPower>) {
            return f.C * (1.0 + std::exp(-f.theta * log_s));
          } else if constexpr (std::is_same_v<T, PolyPower>) {
            return std::log(f.C) + detail::softplus(-f.p * log_s);
          } else if constexpr (std::is_same_v<T, LogPower>) {
            return std::log(f.C) +
                   std::log1p(std::pow(detail::softplus(-log_s), f.q));
          } else if constexpr (std::is_same_v<T, InversePower>) {
            return std::log(f.a) - f.p * log_s;
          } else if constexpr (std::is_same_v<T, Constant>) {
            return std::log(f.B);
          } else {
            return std::log(f.eval_log(log_s));
          }
        },
        v_);
  }

  // inf over s > 0, i.e. the limit s -> infinity.
  double limit_at_infinity() const {
    return std::visit(
        [](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ExpPower>) {
            return std::exp(f.C);
          } else if constexpr (std::is_same_v<T, PolyPower>) {
            return f.C;
          } else if constexpr (std::is_same_v<T, LogPower>) {
            return f.q == 0.0 ? 2.0 * f.C : f.C;
          } else if constexpr (std::is_same_v<T, InversePower>) {
            return 0.0;
          } else if constexpr (std::is_same_v<T, Constant>) {
            return f.B;
          } else {
            return f.values().back();
          }
        },
        v_);
  }

  // Limit s -> 0+ when it is finite.
  std::optional<double> limit_at_zero() const {
    if (const auto* c = std::get_if<Constant>(&v_)) return c->B;
    if (const auto* t = std::get_if<Table>(&v_)) return t->values().front();
    if (const auto* l = std::get_if<LogPower>(&v_); l && l->q == 0.0) {
      return 2.0 * l->C;
    }
    return std::nullopt;
  }

 private:
  explicit RateFunction(Variant v) : v_(std::move(v)) {}

  static void require(bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  }

  Variant v_;
};

// Smallest non-increasing function dominating the points on the grid.
inline RateFunction monotone_envelope(
    std::span<const std::pair<double, double>> points) {
  return RateFunction::tabulated(points);
}

enum class FitModel {
  kLogLogPower,  // log value against log(1/s)
  kLogLogLog,    // log value against log log(1 + 1/s)
  kLogOfLog,     // log log value against log(1/s)
};

struct FitRange {
  double lo;
  double hi;
};

namespace detail {

inline double least_squares_slope(std::span<const double> x,
                                  std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw FitError("fit abscissae are degenerate");
  return sxy / sxx;
}

}  // namespace detail

// Exponent fit from log-values, so that values overflowing a double can be
// fitted. Only samples with s inside `range` participate.
inline double fit_exponent_from_logs(std::span<const double> s,
                                     std::span<const double> log_values,
                                     FitModel model, FitRange range) {
  if (s.size() != log_values.size()) {
    throw FitError("fit: s and values differ in length");
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < range.lo || s[i] > range.hi) continue;
    const double lv = log_values[i];
    if (!std::isfinite(lv)) throw FitError("fit: non-positive or non-finite value");
    const double inv = -std::log(s[i]);
    switch (model) {
      case FitModel::kLogLogPower:
        x.push_back(inv);
        y.push_back(lv);
        break;
      case FitModel::kLogLogLog:
        x.push_back(std::log(detail::softplus(inv)));
        y.push_back(lv);
        break;
      case FitModel::kLogOfLog:
        if (!(lv > 0.0)) throw FitError("fit: log-of-log needs values > 1");
        x.push_back(inv);
        y.push_back(std::log(lv));
        break;
    }
  }
  if (x.size() < 8) throw FitError("fit: fewer than 8 samples in range");
  return detail::least_squares_slope(x, y);
}

// Least-squares slope of the model's linearisation. A positive `floor` is
// subtracted from every value first (for C(1 + ...) families).
inline double fit_exponent(std::span<const std::pair<double, double>> samples,
                           FitModel model, FitRange range, double floor = 0.0) {
  std::vector<double> s, lv;
  s.reserve(samples.size());
  lv.reserve(samples.size());
  for (const auto& [si, v] : samples) {
    if (si < range.lo || si > range.hi) continue;
    const double shifted = v - floor;
    if (!(shifted > 0.0)) throw FitError("fit: non-positive value");
    s.push_back(si);
    lv.push_back(std::log(shifted));
  }
  return fit_exponent_from_logs(s, lv, model, range);
}

}  // namespace ratecalc
