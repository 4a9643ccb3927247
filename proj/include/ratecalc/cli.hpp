#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ratecalc/config.hpp"
#include "ratecalc/dirichlet.hpp"
#include "ratecalc/errors.hpp"
#include "ratecalc/io.hpp"
#include "ratecalc/kernels.hpp"
#include "ratecalc/optconst.hpp"
#include "ratecalc/rate_function.hpp"
#include "ratecalc/transforms.hpp"

// The ratecalc command line. Exit codes: 0 ok, 1 completed but the
// verification did not pass, 2 config, 3 math domain, 4 condition failure,
// 5 cap, 6 solver.
//
// With --out DIR every artifact is written to DIR and manifest.json is written
// last. Without --out the primary artifact goes to stdout and the manifest to
// stderr.

namespace ratecalc::cli {

using json = nlohmann::json;

inline constexpr int kVerificationFailed = 1;

struct Options {
  std::string config_path;
  std::string ratefn_path;
  std::string form_path;
  std::string birth_death;
  std::string s_grid;
  std::string t_grid;
  std::vector<double> t_values;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  std::string kernel;     // xi
  std::string direction;  // transform
  double theta = 0.0;     // example11
  std::string branch;     // example11
  std::string kind;       // optimal
  double s = 0.0;         // optimal
};

struct Run {
  std::string command;
  const Options& opt;
  io::RunConfig cfg;
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> outputs;

  // Writes into --out; without it only the primary artifact goes to stdout.
  void emit(const std::string& name, const std::string& content, bool primary = true) {
    if (!opt.out_dir.empty()) {
      const auto path = std::filesystem::path(opt.out_dir) / name;
      io::write_text_file(path.string(), content);
      outputs.push_back(path.string());
    } else if (primary) {
      out << content;
    }
  }
};

namespace detail {

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

inline double to_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": not a number: \"" + text + "\"");
  }
}

// "min,max,count" as a log-spaced grid
inline std::vector<double> parse_grid(const std::string& text, const std::string& what) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) throw ConfigError(what + ": expected min,max,count");
  const double count = to_double(parts[2], what);
  if (count != std::floor(count) || count < 2) {
    throw ConfigError(what + ": count must be an integer >= 2");
  }
  return log_spaced(to_double(parts[0], what), to_double(parts[1], what),
                    static_cast<std::int64_t>(count));
}

inline FiniteDirichletForm load_form(const Options& opt) {
  if (!opt.form_path.empty() && !opt.birth_death.empty()) {
    throw ConfigError("--form and --birth-death are mutually exclusive");
  }
  if (!opt.form_path.empty()) return io::form_from_json(io::read_json_file(opt.form_path));
  if (opt.birth_death.empty()) throw ConfigError("a form is required: --form or --birth-death");
  const auto parts = split(opt.birth_death, ',');
  if (parts.size() != 4) throw ConfigError("--birth-death: expected kappa,c0,half_width,n");
  const double n = to_double(parts[3], "--birth-death");
  if (n != std::floor(n) || n < 1) throw ConfigError("--birth-death: n must be a positive integer");
  return build_birth_death(to_double(parts[0], "--birth-death"),
                           to_double(parts[1], "--birth-death"),
                           to_double(parts[2], "--birth-death"), static_cast<std::size_t>(n));
}

inline RateFunction load_ratefn(const Options& opt) {
  if (opt.ratefn_path.empty()) throw ConfigError("--ratefn is required");
  return io::rate_function_from_json(io::read_json_file(opt.ratefn_path));
}

inline std::vector<double> s_grid_or(const Options& opt, double lo, double hi,
                                     std::int64_t count) {
  if (!opt.s_grid.empty()) return parse_grid(opt.s_grid, "--s-grid");
  return log_spaced(lo, hi, count);
}

}  // namespace detail

// ---- commands; each returns whether the run passed

inline bool cmd_xi(Run& run) {
  const RateFunction rf = detail::load_ratefn(run.opt);
  std::vector<double> t = run.opt.t_values;
  if (!run.opt.t_grid.empty()) {
    if (!t.empty()) throw ConfigError("--t and --t-grid are mutually exclusive");
    t = detail::parse_grid(run.opt.t_grid, "--t-grid");
  }
  if (t.empty()) throw ConfigError("xi needs --t or --t-grid");
  std::vector<ExtendedValue> xi;
  for (double ti : t) {
    if (run.opt.kernel == "xi1") {
      xi.push_back(xi1(rf, ti, run.cfg.transform));
    } else if (run.opt.kernel == "xi2") {
      xi.push_back(xi2(rf, ti, run.cfg.transform));
    } else {
      throw ConfigError("unknown kernel: " + run.opt.kernel);
    }
  }
  run.emit("xi.csv", io::xi_csv(t, xi));
  return true;
}

inline TransformTable apply_transform(const std::string& direction, const RateFunction& rf,
                                      const std::vector<double>& s_grid,
                                      const TransformConfig& cfg) {
  if (direction == "sp2wl") return wl_from_sp(rf, s_grid, cfg);
  if (direction == "wl2sp") return sp_from_wl(rf, s_grid, cfg);
  if (direction == "sp2sl") return sl_from_sp(rf, s_grid, cfg);
  if (direction == "sl2sp") return sp_from_sl(rf, s_grid, cfg);
  throw ConfigError("unknown transform direction: " + direction);
}

inline void warn_if_inconclusive(Run& run, const TransformTable& table) {
  if (table.verdict && table.verdict->status == VerdictStatus::kInconclusive) {
    run.err << "warning: side condition inconclusive (" << table.verdict->reason << ")\n";
  }
}

inline bool cmd_transform(Run& run) {
  const RateFunction rf = detail::load_ratefn(run.opt);
  if (run.opt.s_grid.empty()) throw ConfigError("transform needs --s-grid");
  const auto grid = detail::parse_grid(run.opt.s_grid, "--s-grid");
  const TransformTable table = apply_transform(run.opt.direction, rf, grid, run.cfg.transform);
  warn_if_inconclusive(run, table);
  run.emit("transform.csv", io::rate_csv(table));
  json meta = io::to_json(table);
  meta["direction"] = run.opt.direction;
  meta["input"] = io::to_json(rf);
  run.emit("transform.json", io::dump(meta), false);
  return true;
}

inline bool cmd_spectrum(Run& run) {
  const FiniteDirichletForm form = detail::load_form(run.opt);
  const SpectralGap g = spectral_gap(form);
  run.emit("spectrum.json", io::dump({{"gap", g.gap},
                                      {"poincare_constant", g.poincare_constant},
                                      {"certificate", g.certificate}}));
  return true;
}

inline bool cmd_optimal(Run& run) {
  const FiniteDirichletForm form = detail::load_form(run.opt);
  const Kind kind = parse_kind(run.opt.kind);
  const OptimalResult r = optimal(form, kind, run.opt.s, run.cfg.solver);
  run.emit("optimal.json", io::dump({{"kind", to_string(kind)},
                                     {"s", run.opt.s},
                                     {"value", r.value},
                                     {"argmax", r.argmax},
                                     {"restarts", r.stats.restarts},
                                     {"converged_restarts", r.stats.converged_restarts}}));
  return true;
}

inline bool cmd_verify(Run& run) {
  const FiniteDirichletForm form = detail::load_form(run.opt);
  const auto grid = detail::s_grid_or(run.opt, 1e-3, 1.0, 12);
  const auto& tcfg = run.cfg.transform;
  const auto& scfg = run.cfg.solver;

  const SpectralGap gap = spectral_gap(form);

  json report;
  report["states"] = form.size();
  report["s_grid"] = grid;
  report["gap"] = gap.gap;
  report["poincare_constant"] = gap.poincare_constant;

  constexpr int kCertTrials = 1000;
  bool certified = true;
  std::vector<EmpiricalRateFunction> emp;
  for (Kind kind : {Kind::kSP, Kind::kSL, Kind::kWL, Kind::kWP}) {
    emp.push_back(empirical_rate(form, kind, grid, scfg));
    const auto& e = emp.back();
    int failures = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto c = certify(form, kind, grid[i], e.values[i], kCertTrials,
                             ratecalc::detail::splitmix64(scfg.seed ^ i));
      if (!c.passed) ++failures;
    }
    certified = certified && failures == 0;
    std::string lower = to_string(kind);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    report["empirical"][to_string(kind)] = {{"values", e.values},
                                            {"certification_failures", failures}};
    run.emit("empirical_" + lower + ".csv", io::rate_csv(e), false);
    run.emit("empirical_" + lower + ".json", io::dump(io::sidecar_json(e)), false);
  }

  const RateFunction sp_table = emp[0].as_rate_function();
  const TransformTable sl = sl_from_sp(sp_table, grid, tcfg);
  warn_if_inconclusive(run, sl);
  run.emit("sl_from_sp.csv", io::rate_csv(sl), false);
  report["transforms"]["sl_from_sp"] = io::to_json(sl);
  const DominationReport dom_sl = dominates(emp[1], sl.rate());
  report["domination"]["SL"] = io::to_json(dom_sl);

  // A bounded empirical SP rate makes xi1 vanish at every level; the WL
  // transform then has no admissible n0 and is reported as not applicable.
  bool wl_pass = true;
  std::optional<TransformTable> wl;
  try {
    wl = wl_from_sp(sp_table, grid, tcfg);
  } catch (const PreconditionError& e) {
    run.err << "warning: " << e.what() << "; WL domination not applicable\n";
    report["transforms"]["wl_from_sp"] = {{"applicable", false}, {"reason", e.what()}};
    report["domination"]["WL"] = {{"applicable", false}};
  }
  if (wl) {
    run.emit("wl_from_sp.csv", io::rate_csv(*wl), false);
    report["transforms"]["wl_from_sp"] = io::to_json(*wl);
    const DominationReport dom_wl = dominates(emp[2], wl->rate());
    report["domination"]["WL"] = io::to_json(dom_wl);
    wl_pass = dom_wl.pass;
  }
  report["certified"] = certified;
  const bool pass = dom_sl.pass && wl_pass && certified;
  report["pass"] = pass;
  run.emit("report.json", io::dump(report));
  return pass;
}

struct Example11Plan {
  RateFunction input;
  FitModel model;
  std::vector<double> grid;
  double predicted;
  bool bounded_check;  // theta = 1 on sp2wl: bounded output instead of a fit
};

inline Example11Plan plan_example11(double theta, const std::string& branch,
                                    const Options& opt) {
  if (!(theta >= 0.5) || !std::isfinite(theta)) throw ConfigError("example11: theta must be >= 1/2");
  const bool sub_linear = theta < 1.0;
  if (branch == "sp2sl" || branch == "sl2sp") {
    if (!sub_linear) throw ConfigError("example11: " + branch + " needs theta in [1/2, 1)");
  } else if (branch == "sp2wl" || branch == "wl2sp") {
    if (sub_linear) throw ConfigError("example11: " + branch + " needs theta >= 1");
  } else {
    throw ConfigError("example11: unknown branch " + branch);
  }
  const double p = theta / (1.0 - theta);
  const double q = (theta - 1.0) / theta;
  if (branch == "sp2sl") {
    return {RateFunction::exp_power(1.0, theta), FitModel::kLogLogPower,
            detail::s_grid_or(opt, 1e-5, 1e-2, 31), p, false};
  }
  if (branch == "sp2wl") {
    return {RateFunction::exp_power(1.0, theta), FitModel::kLogLogLog,
            detail::s_grid_or(opt, 1e-8, 1e-4, 31), q, theta == 1.0};
  }
  if (branch == "sl2sp") {
    return {RateFunction::poly_power(1.0, p), FitModel::kLogOfLog,
            detail::s_grid_or(opt, 1e-4, 1e-2, 31), theta, false};
  }
  return {RateFunction::log_power(1.0, q), FitModel::kLogOfLog,
          detail::s_grid_or(opt, 1e-4, 1e-2, 31), theta, false};
}

// Grows N_max (and k_max with it) until beta_WL(delta^-n n^-theta)/n has
// dropped below the smallest grid s, so the truncated suffix sup is exact.
inline void size_caps_for_wl(const RateFunction& beta_wl, double s_lo, TransformConfig& cfg) {
  const double ld = std::log(cfg.delta);
  auto term = [&](std::int64_t n) {
    const double nd = static_cast<double>(n);
    return beta_wl.eval_log(-nd * ld - cfg.theta_cond * std::log(nd)) / nd;
  };
  constexpr std::int64_t kCeiling = std::int64_t{1} << 33;
  while (term(cfg.N_max) > 0.9 * s_lo) {
    if (cfg.N_max >= kCeiling) throw CapError("example11: N_max would exceed 2^33");
    cfg.N_max *= 2;
  }
  cfg.k_max = std::max(cfg.k_max, cfg.N_max + 1);
}

inline json example11_report(double theta, const std::string& branch, const Options& opt,
                             TransformConfig cfg) {
  constexpr double kTolerance = 0.15;
  constexpr double kBoundedFactor = 3.0;
  const Example11Plan plan = plan_example11(theta, branch, opt);
  if (branch == "wl2sp") size_caps_for_wl(plan.input, plan.grid.front(), cfg);
  const TransformTable table = apply_transform(branch, plan.input, plan.grid, cfg);

  json rep = {{"theta", theta},
              {"branch", branch},
              {"input", io::to_json(plan.input)},
              {"N_max", cfg.N_max},
              {"table", io::to_json(table)}};
  const FitRange range{plan.grid.front(), plan.grid.back()};
  if (plan.bounded_check) {
    const auto [lo, hi] = std::minmax_element(table.beta.begin(), table.beta.end());
    const double factor = *hi / *lo;
    rep["criterion"] = "bounded";
    rep["variation_factor"] = factor;
    rep["pass"] = factor < kBoundedFactor;
  } else {
    const double fitted = fit_exponent_from_logs(table.s, table.log_beta, plan.model, range);
    rep["criterion"] = "exponent";
    rep["model"] = plan.model == FitModel::kLogLogPower  ? "log-log-power"
                   : plan.model == FitModel::kLogLogLog ? "log-log-log"
                                                         : "log-of-log";
    rep["predicted"] = plan.predicted;
    rep["fitted"] = fitted;
    rep["tolerance"] = kTolerance;
    rep["pass"] = std::abs(fitted - plan.predicted) <= kTolerance;
  }
  return rep;
}

inline bool cmd_example11(Run& run) {
  const json rep = example11_report(run.opt.theta, run.opt.branch, run.opt, run.cfg.transform);
  run.emit("example11.json", io::dump(rep));
  return rep["pass"].get<bool>();
}

// ---- entry point

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Rate-function transforms and optimal constants on finite Dirichlet forms",
               "ratecalc"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON config (transform constants, solver)");
    sub->add_option("--out", opt.out_dir, "output directory");
  };
  auto form_flags = [&](CLI::App* sub) {
    sub->add_option("--form", opt.form_path, "JSON form {\"mu\": [...], \"edges\": [[i,j,w],...]}");
    sub->add_option("--birth-death", opt.birth_death, "kappa,c0,half_width,n");
    sub->add_option("--seed", opt.seed, "solver seed");
  };

  auto* xi = app.add_subcommand("xi", "evaluate xi1 or xi2 on a t-grid");
  xi->add_option("kernel", opt.kernel, "xi1 | xi2")->required()->check(CLI::IsMember({"xi1", "xi2"}));
  xi->add_option("--ratefn", opt.ratefn_path, "JSON rate function")->required();
  xi->add_option("--t", opt.t_values, "t values")->delimiter(',');
  xi->add_option("--t-grid", opt.t_grid, "min,max,count (log-spaced)");
  common(xi);

  auto* tr = app.add_subcommand("transform", "apply a rate-function transform");
  tr->add_option("direction", opt.direction, "sp2wl | wl2sp | sp2sl | sl2sp")
      ->required()
      ->check(CLI::IsMember({"sp2wl", "wl2sp", "sp2sl", "sl2sp"}));
  tr->add_option("--ratefn", opt.ratefn_path, "JSON rate function")->required();
  tr->add_option("--s-grid", opt.s_grid, "min,max,count (log-spaced)")->required();
  common(tr);

  auto* ver = app.add_subcommand("verify", "empirical rates, transforms and domination on a form");
  form_flags(ver);
  ver->add_option("--s-grid", opt.s_grid, "min,max,count (log-spaced)");
  common(ver);

  auto* ex = app.add_subcommand("example11", "closed-form families: fitted vs predicted order");
  ex->add_option("--theta", opt.theta, "theta >= 1/2")->required();
  ex->add_option("--branch", opt.branch, "sp2sl | sp2wl | sl2sp | wl2sp")->required();
  ex->add_option("--s-grid", opt.s_grid, "min,max,count (log-spaced)");
  common(ex);

  auto* sp = app.add_subcommand("spectrum", "spectral gap of a form");
  form_flags(sp);
  common(sp);

  auto* op = app.add_subcommand("optimal", "optimal beta of one inequality at one s");
  op->add_option("--kind", opt.kind, "SP | SL | WL | WP")->required();
  op->add_option("--s", opt.s, "s > 0")->required();
  form_flags(op);
  common(op);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfig);
  }

  const auto started = std::chrono::steady_clock::now();
  CLI::App* chosen = app.get_subcommands().front();
  int code = 0;
  bool pass = false;
  std::optional<Run> run;
  try {
    io::RunConfig cfg;
    if (!opt.config_path.empty()) cfg = io::run_config_from_json(io::read_json_file(opt.config_path));
    if (opt.seed) cfg.solver.seed = *opt.seed;
    if (!opt.out_dir.empty()) std::filesystem::create_directories(opt.out_dir);
    run.emplace(Run{chosen->get_name(), opt, cfg, out, err, {}});

    const std::string& name = chosen->get_name();
    if (name == "xi") {
      pass = cmd_xi(*run);
    } else if (name == "transform") {
      pass = cmd_transform(*run);
    } else if (name == "verify") {
      pass = cmd_verify(*run);
    } else if (name == "example11") {
      pass = cmd_example11(*run);
    } else if (name == "spectrum") {
      pass = cmd_spectrum(*run);
    } else {
      pass = cmd_optimal(*run);
    }
    code = pass ? 0 : kVerificationFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    code = static_cast<int>(e.exit_code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    code = static_cast<int>(ExitCode::kConfig);
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    code = static_cast<int>(ExitCode::kConfig);
  }

  if (run) {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json inputs = json::object();
    if (!opt.config_path.empty()) inputs["config"] = opt.config_path;
    if (!opt.ratefn_path.empty()) inputs["ratefn"] = opt.ratefn_path;
    if (!opt.form_path.empty()) inputs["form"] = opt.form_path;
    if (!opt.birth_death.empty()) inputs["birth_death"] = opt.birth_death;
    const json manifest = {{"command", run->command},
                           {"inputs", inputs},
                           {"config", io::to_json(run->cfg.transform)},
                           {"solver", io::to_json(run->cfg.solver)},
                           {"seed", run->cfg.solver.seed},
                           {"outputs", run->outputs},
                           {"wall_clock_seconds", seconds},
                           {"exit_code", code},
                           {"pass", code == 0}};
    try {
      if (!opt.out_dir.empty()) {
        io::write_text_file((std::filesystem::path(opt.out_dir) / "manifest.json").string(),
                            io::dump(manifest));
      } else {
        err << io::dump(manifest);
      }
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      if (code == 0) code = static_cast<int>(e.exit_code());
    }
  }
  return code;
}

}  // namespace ratecalc::cli
