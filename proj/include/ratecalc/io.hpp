#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ratecalc/conditions.hpp"
#include "ratecalc/config.hpp"
#include "ratecalc/dirichlet.hpp"
#include "ratecalc/errors.hpp"
#include "ratecalc/extended_value.hpp"
#include "ratecalc/optconst.hpp"
#include "ratecalc/rate_function.hpp"
#include "ratecalc/transforms.hpp"

namespace ratecalc::io {

using json = nlohmann::json;

// 17 significant digits round-trips every double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + ": malformed JSON: " + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("write failed: " + path);
}

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> known,
                           const std::string& what) {
  if (!j.is_object()) throw InputError(what + ": expected a JSON object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw InputError(what + ": unknown key \"" + key + "\"");
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) throw InputError(what + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(what + ": bad \"" + key + "\": " + e.what());
  }
}

template <class T>
void get_opt(const json& j, const char* key, T& into, const std::string& what) {
  if (j.contains(key)) into = get<T>(j, key, what);
}

}  // namespace detail

// ---- rate functions

inline json to_json(const RateFunction& rf) {
  return std::visit(
      [](const auto& f) -> json {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ExpPower>) {
          return {{"family", "exp_power"}, {"C", f.C}, {"theta", f.theta}};
        } else if constexpr (std::is_same_v<T, PolyPower>) {
          return {{"family", "poly_power"}, {"C", f.C}, {"p", f.p}};
        } else if constexpr (std::is_same_v<T, LogPower>) {
          return {{"family", "log_power"}, {"C", f.C}, {"q", f.q}};
        } else if constexpr (std::is_same_v<T, InversePower>) {
          return {{"family", "inverse_power"}, {"a", f.a}, {"p", f.p}};
        } else if constexpr (std::is_same_v<T, Constant>) {
          return {{"family", "constant"}, {"B", f.B}};
        } else {
          json pts = json::array();
          for (std::size_t i = 0; i < f.s().size(); ++i) pts.push_back({f.s()[i], f.values()[i]});
          return {{"family", "table"}, {"points", pts}};
        }
      },
      rf.variant());
}

inline RateFunction rate_function_from_json(const json& j) {
  const std::string what = "rate function";
  if (!j.is_object()) throw InputError(what + ": expected a JSON object");
  const auto family = detail::get<std::string>(j, "family", what);
  if (family == "exp_power") {
    detail::reject_unknown(j, {"family", "C", "theta"}, what);
    return RateFunction::exp_power(detail::get<double>(j, "C", what),
                                   detail::get<double>(j, "theta", what));
  }
  if (family == "poly_power") {
    detail::reject_unknown(j, {"family", "C", "p"}, what);
    return RateFunction::poly_power(detail::get<double>(j, "C", what),
                                    detail::get<double>(j, "p", what));
  }
  if (family == "log_power") {
    detail::reject_unknown(j, {"family", "C", "q"}, what);
    return RateFunction::log_power(detail::get<double>(j, "C", what),
                                   detail::get<double>(j, "q", what));
  }
  if (family == "inverse_power") {
    detail::reject_unknown(j, {"family", "a", "p"}, what);
    return RateFunction::inverse_power(detail::get<double>(j, "a", what),
                                       detail::get<double>(j, "p", what));
  }
  if (family == "constant") {
    detail::reject_unknown(j, {"family", "B"}, what);
    return RateFunction::constant(detail::get<double>(j, "B", what));
  }
  if (family == "table") {
    detail::reject_unknown(j, {"family", "points"}, what);
    const auto raw = detail::get<std::vector<std::vector<double>>>(j, "points", what);
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : raw) {
      if (p.size() != 2) throw InputError(what + ": points must be [s, value] pairs");
      pts.emplace_back(p[0], p[1]);
    }
    return RateFunction::tabulated(pts);
  }
  throw InputError(what + ": unknown family \"" + family + "\"");
}

// ---- configs

inline json to_json(const TransformConfig& c) {
  json j = {{"delta", c.delta},
            {"C1", c.C1},
            {"C2", c.C2},
            {"C3", c.C3},
            {"C4", c.C4},
            {"C5", c.C5},
            {"C6", c.C6},
            {"theta_cond", c.theta_cond},
            {"r_grid", {{"r_min", c.r_grid.min}, {"r_max", c.r_grid.max}, {"count", c.r_grid.count}}},
            {"k_max", c.k_max},
            {"N_max", c.N_max},
            {"vanish_slope_tol", c.vanish_slope_tol}};
  j["n0"] = c.n0 ? json(*c.n0) : json(nullptr);
  j["s0"] = c.s0 ? json(*c.s0) : json(nullptr);
  return j;
}

inline json to_json(const SolverConfig& c) {
  return {{"restarts", c.restarts},
          {"max_iters", c.max_iters},
          {"rel_tol", c.rel_tol},
          {"seed", c.seed}};
}

struct RunConfig {
  TransformConfig transform;
  SolverConfig solver;
};

// Reads the transform constants at top level and an optional "solver" section.
inline RunConfig run_config_from_json(const json& j) {
  const std::string what = "config";
  detail::reject_unknown(j,
                         {"delta", "n0", "s0", "C1", "C2", "C3", "C4", "C5", "C6",
                          "theta_cond", "r_grid", "k_max", "N_max", "vanish_slope_tol",
                          "solver"},
                         what);
  RunConfig rc;
  auto& c = rc.transform;
  detail::get_opt(j, "delta", c.delta, what);
  if (j.contains("n0") && !j["n0"].is_null()) c.n0 = detail::get<std::int64_t>(j, "n0", what);
  if (j.contains("s0") && !j["s0"].is_null()) c.s0 = detail::get<double>(j, "s0", what);
  detail::get_opt(j, "C1", c.C1, what);
  detail::get_opt(j, "C2", c.C2, what);
  detail::get_opt(j, "C3", c.C3, what);
  detail::get_opt(j, "C4", c.C4, what);
  detail::get_opt(j, "C5", c.C5, what);
  detail::get_opt(j, "C6", c.C6, what);
  detail::get_opt(j, "theta_cond", c.theta_cond, what);
  detail::get_opt(j, "k_max", c.k_max, what);
  detail::get_opt(j, "N_max", c.N_max, what);
  detail::get_opt(j, "vanish_slope_tol", c.vanish_slope_tol, what);
  if (j.contains("r_grid")) {
    const json& g = j["r_grid"];
    detail::reject_unknown(g, {"r_min", "r_max", "count"}, "config.r_grid");
    detail::get_opt(g, "r_min", c.r_grid.min, what);
    detail::get_opt(g, "r_max", c.r_grid.max, what);
    detail::get_opt(g, "count", c.r_grid.count, what);
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    detail::reject_unknown(s, {"restarts", "max_iters", "rel_tol", "seed"}, "config.solver");
    detail::get_opt(s, "restarts", rc.solver.restarts, what);
    detail::get_opt(s, "max_iters", rc.solver.max_iters, what);
    detail::get_opt(s, "rel_tol", rc.solver.rel_tol, what);
    detail::get_opt(s, "seed", rc.solver.seed, what);
  }
  c.validate();
  if (rc.solver.restarts < 20) throw ConfigError("config.solver.restarts must be >= 20");
  if (rc.solver.max_iters < 1 || !(rc.solver.rel_tol > 0.0)) {
    throw ConfigError("config.solver: max_iters and rel_tol must be positive");
  }
  return rc;
}

// ---- forms

inline json to_json(const FiniteDirichletForm& form) {
  json edges = json::array();
  for (const Edge& e : form.edges()) edges.push_back({e.i, e.j, e.w});
  return {{"mu", form.mu()}, {"edges", edges}};
}

inline FiniteDirichletForm form_from_json(const json& j) {
  const std::string what = "form";
  detail::reject_unknown(j, {"mu", "edges"}, what);
  const auto mu = detail::get<std::vector<double>>(j, "mu", what);
  const auto raw = detail::get<std::vector<std::vector<double>>>(j, "edges", what);
  std::vector<Edge> edges;
  for (const auto& e : raw) {
    if (e.size() != 3) throw InputError("form: edges must be [i, j, w] triples");
    if (e[0] < 0 || e[1] < 0 || e[0] != std::floor(e[0]) || e[1] != std::floor(e[1])) {
      throw InputError("form: edge indices must be nonnegative integers");
    }
    edges.push_back(Edge{static_cast<std::size_t>(e[0]), static_cast<std::size_t>(e[1]), e[2]});
  }
  return FiniteDirichletForm(mu, edges);
}

// ---- tables

inline std::string xi_csv(const std::vector<double>& t, const std::vector<ExtendedValue>& xi) {
  std::string out = "t,xi\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    out += format_double(t[i]) + ",";
    out += xi[i].is_finite() ? format_double(xi[i].value()) : xi[i].to_string();
    out += "\n";
  }
  return out;
}

inline std::string rate_csv(const std::vector<double>& s, const std::vector<double>& beta) {
  std::string out = "s,beta\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += format_double(s[i]) + "," + format_double(beta[i]) + "\n";
  }
  return out;
}

inline std::string rate_csv(const TransformTable& t) { return rate_csv(t.s, t.beta); }

inline std::string rate_csv(const EmpiricalRateFunction& e) {
  return rate_csv(e.s_grid, e.values);
}

inline json to_json(const ExtendedValue& v) {
  if (v.is_finite()) return v.value();
  return v.to_string();
}

inline json to_json(const ConditionVerdict& v) {
  json tail = json::array();
  for (const auto& [n, x] : v.sequence_tail) tail.push_back({n, to_json(x)});
  json slope = std::isfinite(v.trend_slope) ? json(v.trend_slope) : json(format_double(v.trend_slope));
  return {{"status", to_string(v.status)},
          {"reason", v.reason},
          {"trend_slope", slope},
          {"sequence_tail", tail}};
}

inline json to_json(const TransformTable& t) {
  json j = {{"s", t.s}, {"log_beta", t.log_beta}, {"index", t.index}, {"n0", t.n0}, {"s0", t.s0}};
  if (t.verdict) j["verdict"] = to_json(*t.verdict);
  return j;
}

inline json sidecar_json(const EmpiricalRateFunction& e) {
  json stats = json::array();
  for (const auto& st : e.stats) {
    stats.push_back({{"restarts", st.restarts},
                     {"converged_restarts", st.converged_restarts},
                     {"best_restart", st.best_restart},
                     {"best_iterations", st.best_iterations}});
  }
  return {{"kind", to_string(e.kind)},
          {"seed", e.seed},
          {"restarts", e.restarts},
          {"envelope_applied", e.envelope_applied},
          {"s_grid", e.s_grid},
          {"raw_values", e.raw_values},
          {"solver_stats", stats}};
}

inline json to_json(const DominationReport& r) {
  return {{"fitted_constant", r.fitted_constant}, {"pass", r.pass}, {"worst_s", r.worst_s}};
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace ratecalc::io
