#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ratecalc/dirichlet.hpp"
#include "ratecalc/errors.hpp"
#include "ratecalc/rate_function.hpp"

// Optimal rate functions of the four inequalities on a finite Dirichlet form.
//
// Each optimal beta at fixed s is the supremum of a 0-homogeneous ratio:
//
//   SP  (mu(f^2) - s E(f)) / mu(|f|)^2               over f >= 0
//   SL  (Ent(f^2) - s E(f)) / mu(f^2)                over f >= 0
//   WL  (Ent(f^2) - s |f|_inf^2) / E(f)              over nonconstant f >= 0
//   WP  (Var(f) - s |f|_inf^2) / E(f)                over nonconstant f
//
// Restricting to f >= 0 is exact for SP, SL and WL because E(|f|) <= E(f)
// while the other terms only see |f|. The supremum is approached by projected
// gradient ascent on {|f|_inf = 1} with seeded random restarts.

namespace ratecalc {

enum class Kind { kSP, kSL, kWL, kWP };

inline const char* to_string(Kind k) {
  switch (k) {
    case Kind::kSP:
      return "SP";
    case Kind::kSL:
      return "SL";
    case Kind::kWL:
      return "WL";
    case Kind::kWP:
      return "WP";
  }
  return "?";
}

inline Kind parse_kind(const std::string& s) {
  if (s == "SP" || s == "sp") return Kind::kSP;
  if (s == "SL" || s == "sl") return Kind::kSL;
  if (s == "WL" || s == "wl") return Kind::kWL;
  if (s == "WP" || s == "wp") return Kind::kWP;
  throw ConfigError("unknown inequality kind: " + s);
}

inline bool nonnegative_kind(Kind k) { return k != Kind::kWP; }

// Lower clamp of each optimal beta: the constant function forces beta_SP >= 1.
inline double kind_floor(Kind k) { return k == Kind::kSP ? 1.0 : 0.0; }

struct SolverConfig {
  int restarts = 20;
  int max_iters = 500;
  double rel_tol = 1e-10;
  std::uint64_t seed = 0;
};

struct SolverStats {
  int restarts = 0;
  int converged_restarts = 0;
  int best_restart = -1;
  int best_iterations = 0;
};

struct OptimalResult {
  double value = 0.0;
  std::vector<double> argmax;
  SolverStats stats;
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for one (kind, s, restart) work item; independent of scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, Kind kind, double s, int restart) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(kind));
  h = splitmix64(h ^ std::bit_cast<std::uint64_t>(s));
  return splitmix64(h ^ static_cast<std::uint64_t>(restart));
}

// Energy below this fraction of total weight * |f|_inf^2 is treated as a
// constant function for the E-denominated ratios.
inline double energy_floor(const FiniteDirichletForm& form) {
  double total = 0.0;
  for (const Edge& e : form.edges()) total += e.w;
  return 1e-13 * std::max(total, 1e-300);
}

}  // namespace detail

// The 0-homogeneous ratio above (no floor clamp); -inf where undefined.
inline double objective(const FiniteDirichletForm& form, Kind kind, double s,
                        std::span<const double> f) {
  const auto& mu = form.mu();
  const double e = energy(form, f);
  switch (kind) {
    case Kind::kSP: {
      const double m1 = abs_mean(mu, f);
      if (!(m1 > 0.0)) return detail::kNegInf;
      return (second_moment(mu, f) - s * e) / (m1 * m1);
    }
    case Kind::kSL: {
      const double m2 = second_moment(mu, f);
      if (!(m2 > 0.0)) return detail::kNegInf;
      return (entropy_of_square(mu, f) - s * e) / m2;
    }
    case Kind::kWL: {
      const double sup = sup_norm(f);
      if (!(e > detail::energy_floor(form) * sup * sup)) return detail::kNegInf;
      return (entropy_of_square(mu, f) - s * sup * sup) / e;
    }
    case Kind::kWP: {
      const double sup = sup_norm(f);
      if (!(e > detail::energy_floor(form) * sup * sup)) return detail::kNegInf;
      return (variance(mu, f) - s * sup * sup) / e;
    }
  }
  return detail::kNegInf;
}

namespace detail {

// Gradient of the ascent surrogate, preconditioned by 1/mu_i (the L^2(mu)
// Riesz representative). For WL/WP the sup-norm term is frozen at its value
// on {|f|_inf = 1}, where the iterates live.
inline void surrogate_gradient(const FiniteDirichletForm& form, Kind kind, double s,
                               std::span<const double> f, std::span<double> g) {
  const auto& mu = form.mu();
  const std::size_t n = f.size();
  std::vector<double> grad_e(n, 0.0);
  for (const Edge& ed : form.edges()) {
    const double d = 2.0 * ed.w * (f[ed.i] - f[ed.j]);
    grad_e[ed.i] += d;
    grad_e[ed.j] -= d;
  }
  const double e = energy(form, f);
  const double m2 = second_moment(mu, f);
  switch (kind) {
    case Kind::kSP: {
      const double m1 = mean(mu, f);
      const double num = m2 - s * e;
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = (2.0 * mu[i] * f[i] - s * grad_e[i]) / (m1 * m1) -
               2.0 * num * mu[i] / (m1 * m1 * m1);
      }
      break;
    }
    case Kind::kSL: {
      const double ent = entropy_of_square(mu, f);
      const double lm2 = std::log(m2);
      const double num = ent - s * e;
      for (std::size_t i = 0; i < n; ++i) {
        const double fi = f[i];
        const double d_ent =
            fi == 0.0 ? 0.0 : 2.0 * mu[i] * fi * (std::log(fi * fi) - lm2);
        g[i] = (d_ent - s * grad_e[i]) / m2 - num * 2.0 * mu[i] * fi / (m2 * m2);
      }
      break;
    }
    case Kind::kWL: {
      const double ent = entropy_of_square(mu, f);
      const double num = ent - s;
      for (std::size_t i = 0; i < n; ++i) {
        const double fi = f[i];
        const double d_ent =
            fi == 0.0 ? 0.0 : 2.0 * mu[i] * fi * (std::log(fi * fi) - std::log(m2));
        g[i] = d_ent / e - num * grad_e[i] / (e * e);
      }
      break;
    }
    case Kind::kWP: {
      const double m1 = mean(mu, f);
      const double var = variance(mu, f);
      const double num = var - s;
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = 2.0 * mu[i] * (f[i] - m1) / e - num * grad_e[i] / (e * e);
      }
      break;
    }
  }
  for (std::size_t i = 0; i < n; ++i) g[i] /= mu[i];
}

// Map onto {f : |f|_inf = 1} (with f >= 0 for the nonnegative kinds).
// `clamp` saturates overflowing coordinates at the box [0, 1]^n or [-1, 1]^n
// instead of rescaling all of them; WL/WP optima often have several
// coordinates on the boundary. Returns false for the zero function.
inline bool project(Kind kind, std::span<double> f, bool clamp = false) {
  const double lo = nonnegative_kind(kind) ? 0.0 : -1.0;
  const double hi = clamp ? 1.0 : std::numeric_limits<double>::infinity();
  for (double& x : f) x = std::clamp(x, nonnegative_kind(kind) ? lo : -hi, hi);
  const double sup = sup_norm(f);
  if (!(sup > 0.0) || !std::isfinite(sup)) return false;
  for (double& x : f) x /= sup;
  return true;
}

struct AscentResult {
  double value = kNegInf;
  std::vector<double> f;
  int iterations = 0;
  bool converged = false;
};

// `box` selects the clamped projection, with gradient components that push
// saturated coordinates outward dropped. It is used as a second phase for
// WL/WP, started from the rescaled ascent's end point.
inline AscentResult ascend(const FiniteDirichletForm& form, Kind kind, double s,
                           std::vector<double> f, const SolverConfig& cfg,
                           bool box = false) {
  AscentResult out;
  if (!project(kind, f, box)) return out;
  double val = objective(form, kind, s, f);
  if (!std::isfinite(val)) return out;

  const std::size_t n = f.size();
  const double lo = nonnegative_kind(kind) ? 0.0 : -1.0;
  std::vector<double> g(n), trial(n);
  double step = 1.0;
  int it = 0;
  bool converged = false;
  for (; it < cfg.max_iters; ++it) {
    surrogate_gradient(form, kind, s, f, g);
    if (box) {
      for (std::size_t i = 0; i < n; ++i) {
        if ((f[i] >= 1.0 && g[i] > 0.0) || (f[i] <= lo && g[i] < 0.0)) g[i] = 0.0;
      }
    }
    double gnorm = 0.0;
    for (double x : g) gnorm = std::max(gnorm, std::abs(x));
    if (!(gnorm > 0.0) || !std::isfinite(gnorm)) {
      converged = gnorm == 0.0;
      break;
    }
    // the step is measured relative to |g|_inf so that the first trial moves
    // coordinates by O(step)
    double trial_val = kNegInf;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = f[i] + (step / gnorm) * g[i];
      if (project(kind, trial, box)) {
        trial_val = objective(form, kind, s, trial);
        if (trial_val > val) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      converged = true;
      break;
    }
    const double gain = trial_val - val;
    f.swap(trial);
    val = trial_val;
    if (gain <= cfg.rel_tol * std::max(1.0, std::abs(val))) {
      converged = true;
      ++it;
      break;
    }
    step = std::min(step * 2.0, 1.0);
  }
  out.value = val;
  out.f = std::move(f);
  out.iterations = it;
  out.converged = converged;
  return out;
}

// Deterministic starting points used in addition to the random restarts.
inline std::vector<std::vector<double>> structured_starts(const FiniteDirichletForm& form,
                                                          Kind kind) {
  const std::size_t n = form.size();
  const auto& mu = form.mu();
  std::vector<std::vector<double>> starts;
  const std::size_t light = static_cast<std::size_t>(
      std::min_element(mu.begin(), mu.end()) - mu.begin());
  if (nonnegative_kind(kind)) {
    if (kind != Kind::kWL) starts.emplace_back(n, 1.0);
    std::vector<double> spike(n, 0.0);
    spike[light] = 1.0;
    starts.push_back(spike);
  } else {
    std::vector<double> ramp(n);
    for (std::size_t i = 0; i < n; ++i) {
      ramp[i] = n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    starts.push_back(ramp);
  }
  return starts;
}

inline std::vector<double> random_start(std::size_t n, Kind kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> f(n);
  const bool spiky = unif(rng) < 0.5;
  for (double& x : f) {
    x = spiky ? std::exp(3.0 * gauss(rng)) : unif(rng);
    if (!nonnegative_kind(kind) && unif(rng) < 0.5) x = -x;
  }
  return f;
}

}  // namespace detail

inline OptimalResult optimal(const FiniteDirichletForm& form, Kind kind, double s,
                             const SolverConfig& cfg) {
  if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("optimal: s must be positive");
  if (cfg.restarts < 20) throw ConfigError("optimal: at least 20 restarts are required");
  if (cfg.max_iters < 1 || !(cfg.rel_tol > 0.0)) {
    throw ConfigError("optimal: max_iters and rel_tol must be positive");
  }
  const std::size_t n = form.size();
  OptimalResult out;
  out.value = kind_floor(kind);
  out.argmax.assign(n, 1.0);
  if (n == 1) {
    out.stats.restarts = 0;
    return out;
  }

  auto starts = detail::structured_starts(form, kind);
  const int structured = static_cast<int>(starts.size());
  for (int r = 0; r < cfg.restarts; ++r) {
    std::mt19937_64 rng(detail::derive_seed(cfg.seed, kind, s, r));
    starts.push_back(detail::random_start(n, kind, rng));
  }

  double best = detail::kNegInf;
  for (int r = 0; r < static_cast<int>(starts.size()); ++r) {
    auto res = detail::ascend(form, kind, s, std::move(starts[static_cast<std::size_t>(r)]),
                              cfg);
    if (kind == Kind::kWL || kind == Kind::kWP) {
      if (res.value > detail::kNegInf) {
        auto polished = detail::ascend(form, kind, s, res.f, cfg, true);
        if (polished.value > res.value) {
          polished.converged = polished.converged || res.converged;
          polished.iterations += res.iterations;
          res = std::move(polished);
        }
      }
    }
    ++out.stats.restarts;
    if (res.converged) ++out.stats.converged_restarts;
    if (res.value > best) {
      best = res.value;
      out.stats.best_restart = r - structured;
      out.stats.best_iterations = res.iterations;
      out.argmax = std::move(res.f);
    }
  }
  if (out.stats.converged_restarts == 0) {
    throw SolverError(std::string("optimal ") + to_string(kind) + " at s=" +
                      std::to_string(s) + ": no restart converged within " +
                      std::to_string(cfg.max_iters) + " iterations (best objective " +
                      std::to_string(best) + ")");
  }
  out.value = std::max(best, kind_floor(kind));
  return out;
}

inline double optimal_sp(const FiniteDirichletForm& form, double s, const SolverConfig& cfg) {
  return optimal(form, Kind::kSP, s, cfg).value;
}
inline double optimal_sl(const FiniteDirichletForm& form, double s, const SolverConfig& cfg) {
  return optimal(form, Kind::kSL, s, cfg).value;
}
inline double optimal_wl(const FiniteDirichletForm& form, double s, const SolverConfig& cfg) {
  return optimal(form, Kind::kWL, s, cfg).value;
}
inline double optimal_wp(const FiniteDirichletForm& form, double s, const SolverConfig& cfg) {
  return optimal(form, Kind::kWP, s, cfg).value;
}

// Exhaustive scan over hyperspherical angles at the given angular resolution.
// Nonnegative kinds scan the positive orthant; WP scans a half sphere (the
// ratio is even in f).
inline double brute_force_oracle(const FiniteDirichletForm& form, Kind kind, double s,
                                 double resolution) {
  const std::size_t n = form.size();
  if (n > 4) throw InputError("brute_force_oracle: at most 4 states");
  if (!(resolution > 0.0) || resolution > 1e-2) {
    throw ConfigError("brute_force_oracle: resolution must be in (0, 1e-2]");
  }
  if (!(s >= 0.0)) throw DomainError("brute_force_oracle: s must be >= 0");
  double best = kind_floor(kind);
  if (n == 1) return best;

  const std::size_t dims = n - 1;
  std::vector<double> range(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    range[d] = nonnegative_kind(kind) ? std::numbers::pi / 2 : std::numbers::pi;
  }
  std::vector<int> steps(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    steps[d] = static_cast<int>(std::ceil(range[d] / resolution));
  }

  std::vector<int> idx(dims, 0);
  std::vector<double> f(n), sin_prefix(n);
  for (;;) {
    double prod = 1.0;
    for (std::size_t d = 0; d < dims; ++d) {
      const double a = range[d] * idx[d] / steps[d];
      f[d] = prod * std::cos(a);
      prod *= std::sin(a);
    }
    f[n - 1] = prod;
    const double v = objective(form, kind, s, f);
    if (v > best) best = v;

    std::size_t d = 0;
    while (d < dims && ++idx[d] > steps[d]) idx[d++] = 0;
    if (d == dims) break;
  }
  return best;
}

struct EmpiricalRateFunction {
  Kind kind = Kind::kSP;
  std::vector<double> s_grid;
  std::vector<double> raw_values;  // solver output before the envelope
  std::vector<double> values;      // non-increasing
  std::vector<SolverStats> stats;
  int restarts = 0;
  std::uint64_t seed = 0;
  bool envelope_applied = false;

  RateFunction as_rate_function() const {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < s_grid.size(); ++i) pts.emplace_back(s_grid[i], values[i]);
    return RateFunction::tabulated(pts);
  }
};

// Worker count from RATECALC_THREADS, else the hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("RATECALC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline EmpiricalRateFunction empirical_rate(const FiniteDirichletForm& form, Kind kind,
                                            std::span<const double> s_grid,
                                            const SolverConfig& cfg) {
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (!(s_grid[i] > 0.0) || (i > 0 && !(s_grid[i] > s_grid[i - 1]))) {
      throw ConfigError("empirical_rate: s-grid must be positive and ascending");
    }
  }
  if (s_grid.empty()) throw ConfigError("empirical_rate: empty s-grid");

  const std::size_t m = s_grid.size();
  std::vector<OptimalResult> results(m);
  std::vector<std::exception_ptr> errors(m);
  const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(m));
  auto work = [&](unsigned w) {
    for (std::size_t i = w; i < m; i += workers) {
      try {
        results[i] = optimal(form, kind, s_grid[i], cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  EmpiricalRateFunction out;
  out.kind = kind;
  out.s_grid.assign(s_grid.begin(), s_grid.end());
  out.restarts = cfg.restarts;
  out.seed = cfg.seed;
  for (const auto& r : results) {
    out.raw_values.push_back(r.value);
    out.stats.push_back(r.stats);
  }
  out.values = out.raw_values;
  for (std::size_t i = m - 1; i-- > 0;) out.values[i] = std::max(out.values[i], out.values[i + 1]);
  out.envelope_applied = true;
  return out;
}

struct DominationReport {
  double fitted_constant = 0.0;
  bool pass = false;
  double worst_s = 0.0;
};

// fitted_constant = max over the grid of empirical(s) / reference(s).
inline DominationReport dominates(const EmpiricalRateFunction& empirical,
                                  const RateFunction& reference) {
  DominationReport rep;
  rep.fitted_constant = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < empirical.s_grid.size(); ++i) {
    const double s = empirical.s_grid[i];
    const double ref = reference.eval(s);
    if (!(ref > 0.0) || !std::isfinite(ref)) {
      throw DomainError("dominates: reference is not positive and finite at s=" +
                        std::to_string(s));
    }
    const double ratio = empirical.values[i] / ref;
    if (ratio > rep.fitted_constant) {
      rep.fitted_constant = ratio;
      rep.worst_s = s;
    }
  }
  rep.pass = std::isfinite(rep.fitted_constant);
  return rep;
}

struct CertificationResult {
  bool passed = true;
  double worst_excess = -std::numeric_limits<double>::infinity();  // max LHS - RHS
};

// Checks the inequality for `beta` at `s` on random test functions
// (sign-unrestricted), with beta inflated by the relative factor `inflation`.
inline CertificationResult certify(const FiniteDirichletForm& form, Kind kind, double s,
                                   double beta, int trials, std::uint64_t seed,
                                   double inflation = 1e-9) {
  const auto& mu = form.mu();
  const std::size_t n = form.size();
  const double b = beta * (1.0 + inflation);
  std::mt19937_64 rng(detail::splitmix64(seed));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CertificationResult out;
  std::vector<double> f(n);
  for (int t = 0; t < trials; ++t) {
    const int shape = t % 3;
    for (std::size_t i = 0; i < n; ++i) {
      if (shape == 0) {
        f[i] = unif(rng);
      } else if (shape == 1) {
        f[i] = std::exp(2.0 * gauss(rng));
      } else {
        f[i] = 1.0 + 0.1 * gauss(rng);
      }
    }
    const double e = energy(form, f);
    const double sup = sup_norm(f);
    double lhs = 0.0, rhs = 0.0;
    switch (kind) {
      case Kind::kSP: {
        const double m1 = abs_mean(mu, f);
        lhs = second_moment(mu, f);
        rhs = s * e + b * m1 * m1;
        break;
      }
      case Kind::kSL:
        lhs = entropy_of_square(mu, f);
        rhs = s * e + b * second_moment(mu, f);
        break;
      case Kind::kWL:
        lhs = entropy_of_square(mu, f);
        rhs = b * e + s * sup * sup;
        break;
      case Kind::kWP:
        lhs = variance(mu, f);
        rhs = b * e + s * sup * sup;
        break;
    }
    const double excess = lhs - rhs;
    out.worst_excess = std::max(out.worst_excess, excess);
    if (excess > 1e-12 * std::max(1.0, std::abs(lhs))) out.passed = false;
  }
  return out;
}

}  // namespace ratecalc
