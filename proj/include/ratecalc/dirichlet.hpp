#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "ratecalc/errors.hpp"

namespace ratecalc {

struct Edge {
  std::size_t i;
  std::size_t j;
  double w;
};

// Probability measure plus symmetric nonnegative edge weights on n states,
// with energy E(f, f) = 1/2 sum_{i != j} w_ij (f_i - f_j)^2.
class FiniteDirichletForm {
 public:
  FiniteDirichletForm(std::vector<double> mu, const std::vector<Edge>& edges)
      : mu_(std::move(mu)) {
    const std::size_t n = mu_.size();
    if (n == 0) throw InputError("form needs at least one state");
    double total = 0.0;
    for (double m : mu_) {
      if (!(m > 0.0) || !std::isfinite(m)) {
        throw InputError("measure entries must be strictly positive");
      }
      total += m;
    }
    if (std::abs(total - 1.0) > 1e-9 * static_cast<double>(n)) {
      throw InputError("measure must sum to 1");
    }
    for (double& m : mu_) m /= total;

    weights_.assign(n * n, 0.0);
    for (const Edge& e : edges) {
      if (e.i >= n || e.j >= n) throw InputError("edge index out of range");
      if (e.i == e.j) throw InputError("self-loops are not allowed");
      if (!(e.w >= 0.0) || !std::isfinite(e.w)) {
        throw InputError("edge weights must be nonnegative");
      }
      weights_[e.i * n + e.j] += e.w;
      weights_[e.j * n + e.i] += e.w;
    }
    rebuild_edges();
  }

  // Dense symmetric weight matrix with zero diagonal (row-major, n x n).
  static FiniteDirichletForm from_matrix(std::vector<double> mu,
                                         std::span<const double> weights) {
    const std::size_t n = mu.size();
    if (weights.size() != n * n) throw InputError("weight matrix must be n x n");
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
      if (weights[i * n + i] != 0.0) throw InputError("weight diagonal must be zero");
      for (std::size_t j = i + 1; j < n; ++j) {
        if (weights[i * n + j] != weights[j * n + i]) {
          throw InputError("weight matrix must be symmetric");
        }
        if (weights[i * n + j] != 0.0) edges.push_back({i, j, weights[i * n + j]});
      }
    }
    return FiniteDirichletForm(std::move(mu), edges);
  }

  std::size_t size() const noexcept { return mu_.size(); }
  const std::vector<double>& mu() const noexcept { return mu_; }
  double weight(std::size_t i, std::size_t j) const { return weights_[i * size() + j]; }
  // positive-weight edges with i < j
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  bool connected() const {
    const std::size_t n = size();
    std::vector<std::vector<std::size_t>> adj(n);
    for (const Edge& e : edges_) {
      adj[e.i].push_back(e.j);
      adj[e.j].push_back(e.i);
    }
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t u : adj[v]) {
        if (!seen[u]) {
          seen[u] = 1;
          ++count;
          stack.push_back(u);
        }
      }
    }
    return count == n;
  }

 private:
  void rebuild_edges() {
    const std::size_t n = size();
    edges_.clear();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (weights_[i * n + j] > 0.0) edges_.push_back({i, j, weights_[i * n + j]});
      }
    }
  }

  std::vector<double> mu_;
  std::vector<double> weights_;
  std::vector<Edge> edges_;
};

namespace detail {

inline void check_length(const FiniteDirichletForm& form, std::span<const double> f) {
  if (f.size() != form.size()) throw InputError("function length does not match form");
}

inline void check_length(std::span<const double> mu, std::span<const double> f) {
  if (f.size() != mu.size()) throw InputError("function length does not match measure");
}

}  // namespace detail

inline double energy(const FiniteDirichletForm& form, std::span<const double> f) {
  detail::check_length(form, f);
  double e = 0.0;
  for (const Edge& ed : form.edges()) {
    const double d = f[ed.i] - f[ed.j];
    e += ed.w * d * d;
  }
  return e;
}

inline double mean(std::span<const double> mu, std::span<const double> f) {
  detail::check_length(mu, f);
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) m += mu[i] * f[i];
  return m;
}

inline double second_moment(std::span<const double> mu, std::span<const double> f) {
  detail::check_length(mu, f);
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) m += mu[i] * f[i] * f[i];
  return m;
}

inline double abs_mean(std::span<const double> mu, std::span<const double> f) {
  detail::check_length(mu, f);
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) m += mu[i] * std::abs(f[i]);
  return m;
}

// Centred, so it stays accurate for nearly constant f.
inline double variance(std::span<const double> mu, std::span<const double> f) {
  const double m = mean(mu, f);
  double v = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) v += mu[i] * (f[i] - m) * (f[i] - m);
  return v;
}

inline double sup_norm(std::span<const double> f) {
  double m = 0.0;
  for (double x : f) m = std::max(m, std::abs(x));
  return m;
}

// x log x with 0 log 0 = 0.
inline double xlogx(double x) {
  if (x == 0.0) return 0.0;
  return x * std::log(std::max(x, 1e-300));
}

// Ent_mu(g) = mu(g log g) - mu(g) log mu(g) for g >= 0.
inline double entropy(std::span<const double> mu, std::span<const double> g) {
  detail::check_length(mu, g);
  double a = 0.0, m = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] >= 0.0)) throw DomainError("entropy: negative entry");
    a += mu[i] * xlogx(g[i]);
    m += mu[i] * g[i];
  }
  return std::max(0.0, a - xlogx(m));
}

// Ent_mu(f^2)
inline double entropy_of_square(std::span<const double> mu, std::span<const double> f) {
  std::vector<double> g(f.size());
  std::transform(f.begin(), f.end(), g.begin(), [](double x) { return x * x; });
  return entropy(mu, g);
}

// f_n = min{(|f| - delta^{n/2})_+, delta^{(n+1)/2} - delta^{n/2}}
inline std::vector<double> truncation_sequence(std::span<const double> f, double delta,
                                               int n) {
  if (!(delta > 2.0)) throw DomainError("truncation_sequence: delta must exceed 2");
  if (n < 0) throw DomainError("truncation_sequence: n must be >= 0");
  const double lo = std::pow(delta, 0.5 * n);
  const double cap = std::pow(delta, 0.5 * (n + 1)) - lo;
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    out[i] = std::min(std::max(std::abs(f[i]) - lo, 0.0), cap);
  }
  return out;
}

// Masses of A_n = {delta^n <= f^2 < delta^{n+1}} and B_n^c = {f^2 >= delta^n}
// for n = 0..n_max.
struct LevelData {
  double delta = 0.0;
  std::vector<double> masses_A;
  std::vector<double> masses_Bc;

  double mass_B(int n) const { return 1.0 - masses_Bc[static_cast<std::size_t>(n)]; }
};

inline LevelData level_data(std::span<const double> f, std::span<const double> mu,
                            double delta, int n_max) {
  if (!(delta > 2.0)) throw DomainError("level_data: delta must exceed 2");
  if (n_max < 0) throw DomainError("level_data: n_max must be >= 0");
  detail::check_length(mu, f);
  LevelData out;
  out.delta = delta;
  out.masses_A.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  out.masses_Bc.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (int n = 0; n <= n_max; ++n) {
    const double lo = std::pow(delta, n);
    const double hi = lo * delta;
    double a = 0.0, bc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double sq = f[i] * f[i];
      if (sq >= lo) {
        bc += mu[i];
        if (sq < hi) a += mu[i];
      }
    }
    out.masses_A[static_cast<std::size_t>(n)] = a;
    out.masses_Bc[static_cast<std::size_t>(n)] = bc;
  }
  return out;
}

struct EigenSystem {
  std::vector<double> values;   // ascending
  std::vector<double> vectors;  // column k = eigenvector of values[k], row-major n x n
};

// Cyclic Jacobi diagonalisation of a dense symmetric matrix.
inline EigenSystem jacobi_eigen(std::vector<double> a, std::size_t n,
                                double tol = 1e-12, int max_sweeps = 100) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a[i * n + j] * a[i * n + j];
    return std::sqrt(s);
  };
  double scale = 0.0;
  for (double x : a) scale += x * x;
  scale = std::sqrt(scale);

  for (int sweep = 0; sweep < max_sweeps && off_norm() > tol * std::max(scale, 1e-300);
       ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a[x * n + x] < a[y * n + y]; });
  EigenSystem out;
  out.values.resize(n);
  out.vectors.assign(n * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a[order[k] * n + order[k]];
    for (std::size_t i = 0; i < n; ++i) out.vectors[i * n + k] = v[i * n + order[k]];
  }
  return out;
}

struct SpectralGap {
  double gap = 0.0;
  double poincare_constant = 0.0;  // 1 / gap
  std::vector<double> certificate;  // mu(f) = 0, Var_mu(f) = 1, E(f) = gap
};

// gap = min over nonconstant f of E(f, f) / Var_mu(f), the second-smallest
// eigenvalue of M^{-1/2} L M^{-1/2} with L the weighted graph Laplacian.
inline SpectralGap spectral_gap(const FiniteDirichletForm& form) {
  const std::size_t n = form.size();
  if (n < 2) throw DomainError("spectral_gap: needs at least two states");
  if (!form.connected()) {
    throw SingularityError("spectral_gap: weight graph is disconnected (gap = 0)");
  }
  const auto& mu = form.mu();
  std::vector<double> a(n * n, 0.0);
  for (const Edge& e : form.edges()) {
    a[e.i * n + e.i] += e.w;
    a[e.j * n + e.j] += e.w;
    a[e.i * n + e.j] -= e.w;
    a[e.j * n + e.i] -= e.w;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] /= std::sqrt(mu[i] * mu[j]);

  const EigenSystem es = jacobi_eigen(std::move(a), n);
  const double top = std::abs(es.values.back());
  SpectralGap out;
  out.gap = es.values[1];
  if (!(out.gap > 1e-12 * std::max(top, 1e-300))) {
    throw SingularityError("spectral_gap: gap is numerically zero");
  }
  out.poincare_constant = 1.0 / out.gap;
  out.certificate.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.certificate[i] = es.vectors[i * n + 1] / std::sqrt(mu[i]);
  }
  const double m = mean(mu, out.certificate);
  for (double& x : out.certificate) x -= m;
  const double sd = std::sqrt(variance(mu, out.certificate));
  for (double& x : out.certificate) x /= sd;
  return out;
}

// Nearest-neighbour discretisation of mu(dx) ~ exp(-c0 |x|^kappa) dx with
// E(f, f) ~ int |f'|^2 dmu on a uniform grid over [-half_width, half_width].
inline FiniteDirichletForm build_birth_death(double kappa, double c0, double half_width,
                                             int n) {
  if (n < 3 || n % 2 == 0) throw InputError("birth-death: n must be odd and >= 3");
  if (!(kappa > 0.0) || !(c0 > 0.0) || !(half_width > 0.0)) {
    throw InputError("birth-death: kappa, c0 and half_width must be positive");
  }
  const double h = 2.0 * half_width / static_cast<double>(n - 1);
  std::vector<double> log_mu(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    // symmetric about the centre so that mu_i = mu_{n-1-i} exactly
    const double x = h * std::abs(static_cast<double>(i - (n - 1) / 2));
    log_mu[static_cast<std::size_t>(i)] = -c0 * std::pow(x, kappa);
  }
  const double top = *std::max_element(log_mu.begin(), log_mu.end());
  std::vector<double> mu(log_mu.size());
  double z = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    mu[i] = std::exp(log_mu[i] - top);
    z += mu[i];
  }
  for (double& m : mu) m /= z;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < mu.size(); ++i) {
    edges.push_back({i, i + 1, (mu[i] + mu[i + 1]) / (2.0 * h * h)});
  }
  return FiniteDirichletForm(std::move(mu), edges);
}

}  // namespace ratecalc
