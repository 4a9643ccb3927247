#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ratecalc/errors.hpp"

namespace ratecalc {

// Log-spaced grid {min, ..., max} with `count` points, endpoints included.
struct LogGrid {
  double min = 1e-3;
  double max = 1.0;
  std::int64_t count = 12;

  void validate(std::int64_t min_count = 2) const {
    if (!(min > 0.0) || !std::isfinite(min) || !std::isfinite(max)) {
      throw ConfigError("grid bounds must be positive and finite");
    }
    if (!(min < max)) throw ConfigError("grid requires min < max");
    if (count < min_count) throw ConfigError("grid has too few points");
  }

  double step() const {
    return (std::log(max) - std::log(min)) / static_cast<double>(count - 1);
  }
  double log_at(std::int64_t i) const {
    if (i == count - 1) return std::log(max);
    return std::log(min) + static_cast<double>(i) * step();
  }
  double at(std::int64_t i) const {
    if (i == 0) return min;
    if (i == count - 1) return max;
    return std::exp(log_at(i));
  }
  std::vector<double> points() const {
    std::vector<double> out(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = at(i);
    return out;
  }
};

inline std::vector<double> log_spaced(double min, double max, std::int64_t count) {
  LogGrid g{min, max, count};
  g.validate();
  return g.points();
}

// Free constants of the transforms plus the numeric grids and caps.
struct TransformConfig {
  double delta = 4.0;
  std::optional<std::int64_t> n0;  // auto-detected when empty
  std::optional<double> s0;        // largest grid s when empty
  double C1 = 1.0;
  double C2 = 1.0;
  double C3 = 1.0;
  double C4 = 1.0;
  double C5 = 1.0;
  double C6 = 1.0;
  double theta_cond = 1.0;
  LogGrid r_grid{1e-300, 1e300, 24001};
  std::int64_t k_max = 100000;
  std::int64_t N_max = 100000;
  // A sequence counts as vanishing only if its log-log tail slope is below
  // -vanish_slope_tol; flatter tails are reported as non-vanishing.
  double vanish_slope_tol = 0.1;

  void validate() const {
    if (!(delta > 2.0) || !std::isfinite(delta)) {
      throw ConfigError("delta must exceed 2");
    }
    if (n0 && *n0 < 2) throw ConfigError("n0 must be >= 2");
    if (s0 && !(*s0 > 0.0)) throw ConfigError("s0 must be positive");
    for (double c : {C1, C2, C3, C4, C5, C6, theta_cond}) {
      if (!(c > 0.0) || !std::isfinite(c)) {
        throw ConfigError("constants C1..C6 and theta_cond must be positive");
      }
    }
    r_grid.validate(100);
    if (k_max < 2) throw ConfigError("k_max must be >= 2");
    if (N_max < 4) throw ConfigError("N_max must be >= 4");
    if (!(vanish_slope_tol >= 0.0)) {
      throw ConfigError("vanish_slope_tol must be nonnegative");
    }
  }
};

}  // namespace ratecalc
