// Acceptance suite: one PASS/FAIL line per criterion.
// Exit 0 when every selected criterion passes, 77 when the only failures are
// the documented known deviations, 1 otherwise.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "ratecalc/cli.hpp"

using namespace ratecalc;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kKnownDeviationsOnly = 77;
const std::set<std::string> kKnownDeviations{"2b", "2e"};

constexpr Kind kAllKinds[] = {Kind::kSP, Kind::kSL, Kind::kWL, Kind::kWP};

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string title;
  double time_limit_s;
  std::function<Outcome()> check;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }

std::vector<FiniteDirichletForm> small_fixtures() {
  return {
      FiniteDirichletForm({0.5, 0.5}, {{0, 1, 1.0}}),
      FiniteDirichletForm({0.3, 0.7}, {{0, 1, 2.0}}),
      FiniteDirichletForm({0.1, 0.9}, {{0, 1, 0.5}}),
      FiniteDirichletForm({1.0 / 3, 1.0 / 3, 1.0 / 3}, {{0, 1, 1.0}, {1, 2, 1.0}}),
      FiniteDirichletForm({0.2, 0.5, 0.3}, {{0, 1, 0.7}, {1, 2, 1.6}}),
      FiniteDirichletForm({0.15, 0.25, 0.6}, {{0, 1, 1.0}, {1, 2, 0.4}, {0, 2, 2.5}}),
  };
}

SolverConfig seeded(std::uint64_t seed) {
  SolverConfig c;
  c.seed = seed;
  return c;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ratecalc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& tag) {
  const auto p = fs::temp_directory_path() / ("ratecalc_accept_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---- 1

Outcome kernel_exactness() {
  const TransformConfig cfg;
  const auto inv = RateFunction::inverse_power(1, 1);
  double worst1 = 0.0, worst2 = 0.0;
  for (double t : log_spaced(1e-3, 1e3, 20)) worst1 = std::max(worst1, rel(xi1(inv, t, cfg).value(), 4 * t));
  for (double t : log_spaced(1, 1e3, 20)) worst2 = std::max(worst2, rel(xi2(inv, t, cfg).value(), 4 / (t * t)));
  return {worst1 < 1e-4 && worst2 < 1e-4,
          "xi1 max rel err " + fmt("%.2e", worst1) + ", xi2 max rel err " + fmt("%.2e", worst2) +
              " (tol 1e-4)"};
}

// ---- 2

Outcome example_exponent(double theta, const std::string& branch, double target) {
  constexpr double kTolerance = 0.15;
  const cli::Options opt;
  const json rep = cli::example11_report(theta, branch, opt, TransformConfig{});
  const double fitted = rep["fitted"].get<double>();
  return {std::abs(fitted - target) <= kTolerance,
          "fitted " + fmt("%.4f", fitted) + ", target " + fmt("%.2f", target) + " +/- 0.15"};
}

Outcome example_bounded() {
  const cli::Options opt;
  const json rep = cli::example11_report(1.0, "sp2wl", opt, TransformConfig{});
  const double factor = rep["variation_factor"].get<double>();
  return {factor < 3.0, "variation factor " + fmt("%.4f", factor) + " (limit 3)"};
}

// ---- 3

Outcome condition_gating() {
  const auto dir = scratch_dir("gate");
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  };
  const auto theta1 = write("t1.json", R"({"family":"exp_power","C":1,"theta":1})");
  const auto theta06 = write("t06.json", R"({"family":"exp_power","C":1,"theta":0.6})");
  const int code1 = run_cli({"transform", "sp2sl", "--ratefn", theta1, "--s-grid", "1e-3,1e-1,12",
                             "--out", (dir / "a").string()});
  const int code06 = run_cli({"transform", "sp2sl", "--ratefn", theta06, "--s-grid", "1e-3,1e-1,12",
                              "--out", (dir / "b").string()});
  std::string verdict = "missing";
  if (fs::exists(dir / "b" / "transform.json")) {
    verdict = json::parse(slurp(dir / "b" / "transform.json"))["verdict"]["status"].get<std::string>();
  }
  fs::remove_all(dir);
  return {code1 == 4 && code06 == 0 && verdict == "holds_empirically",
          "theta=1 exit " + std::to_string(code1) + " (want 4); theta=0.6 exit " + std::to_string(code06) +
              ", verdict " + verdict};
}

// ---- 4

Outcome oracle_equivalence() {
  double worst = 0.0;
  int cases = 0;
  for (const auto& form : small_fixtures()) {
    for (Kind k : kAllKinds) {
      for (double s : {0.01, 0.05, 0.2}) {
        const double got = optimal(form, k, s, seeded(7)).value;
        const double want = brute_force_oracle(form, k, s, 1e-3);
        worst = std::max(worst, rel(got, want));
        ++cases;
      }
    }
  }
  return {worst < 0.01, std::to_string(cases) + " cases, max rel diff " + fmt("%.2e", worst) + " (tol 1e-2)"};
}

// ---- 5

std::vector<double> random_measure(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> mu(n);
  double z = 0.0;
  for (double& m : mu) z += (m = u(rng));
  for (double& m : mu) m /= z;
  return mu;
}

FiniteDirichletForm random_form(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> w(0.1, 3.0);
  std::vector<Edge> edges;
  for (std::size_t i = 1; i < n; ++i) edges.push_back({rng() % i, i, w(rng)});
  for (std::size_t extra = 0; extra < n / 2; ++extra) {
    const std::size_t a = rng() % n, b = rng() % n;
    if (a != b) edges.push_back({a, b, w(rng)});
  }
  return FiniteDirichletForm(random_measure(rng, n), edges);
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> f(n);
  for (double& x : f) x = u(rng);
  return f;
}

Outcome property_suites() {
  constexpr int kCases = 200;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> delta_dist(2.01, 10.0), unit(0.0, 1.0);
  std::vector<std::pair<std::string, int>> failures;
  auto suite = [&](const std::string& name, const std::function<bool()>& one) {
    int bad = 0;
    for (int i = 0; i < kCases; ++i) {
      if (!one()) ++bad;
    }
    failures.emplace_back(name, bad);
  };

  suite("energy-sum", [&] {
    const std::size_t n = 2 + rng() % 9;
    const auto form = random_form(rng, n);
    const auto f = random_vector(rng, n, 100.0);
    const double delta = delta_dist(rng);
    double sum = 0.0;
    for (int k = 0; k <= 30; ++k) sum += energy(form, truncation_sequence(f, delta, k));
    return sum <= energy(form, f) * (1 + 1e-12);
  });
  suite("markov", [&] {
    const std::size_t n = 1 + rng() % 12;
    const auto mu = random_measure(rng, n);
    const auto f = random_vector(rng, n, 40.0);
    const double delta = delta_dist(rng);
    const auto ld = level_data(f, mu, delta, 8);
    const double m2 = second_moment(mu, f);
    for (int k = 0; k <= 8; ++k) {
      if (ld.masses_Bc[static_cast<std::size_t>(k)] > std::pow(delta, -k) * m2 * (1 + 1e-12)) return false;
    }
    return true;
  });
  suite("entropy homogeneity/nonnegativity", [&] {
    const std::size_t n = 1 + rng() % 10;
    const auto mu = random_measure(rng, n);
    auto g = random_vector(rng, n, 5.0);
    for (double& x : g) x *= x;
    const double c = 0.01 + 100 * unit(rng);
    std::vector<double> cg(n);
    for (std::size_t i = 0; i < n; ++i) cg[i] = c * g[i];
    const double e = entropy(mu, g);
    return e >= -1e-12 && std::abs(entropy(mu, cg) - c * e) <= 1e-9 * (1 + c * e);
  });
  suite("entropy variational", [&] {
    const std::size_t n = 2 + rng() % 9;
    const auto mu = random_measure(rng, n);
    const auto f = random_vector(rng, n, 5.0);
    auto phi = random_vector(rng, n, 3.0);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += mu[i] * std::exp(phi[i]);
    double rhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) rhs += mu[i] * f[i] * f[i] * (phi[i] - std::log(z));
    return entropy_of_square(mu, f) >= rhs - 1e-9 * (1 + std::abs(rhs));
  });
  suite("centering", [&] {
    const std::size_t n = 2 + rng() % 9;
    const auto mu = random_measure(rng, n);
    auto f = random_vector(rng, n, 5.0);
    if (rng() % 2) {
      for (double& x : f) x += 10.0;
    }
    const double m = mean(mu, f);
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = f[i] - m;
    const double bound = entropy_of_square(mu, c) + 2.0 * second_moment(mu, c);
    return entropy_of_square(mu, f) <= bound * (1 + 1e-12) + 1e-12;
  });

  const TransformConfig tcfg;
  std::uniform_real_distribution<double> amp(0.2, 4.0), ex(0.5, 2.5), lt(-10.0, 3.0);
  auto random_rate = [&](int which) {
    switch (which % 3) {
      case 0:
        return RateFunction::exp_power(amp(rng), ex(rng));
      case 1:
        return RateFunction::poly_power(amp(rng), ex(rng));
      default:
        return RateFunction::inverse_power(amp(rng), ex(rng));
    }
  };
  int which = 0;
  suite("xi1 non-decreasing", [&] {
    const auto rf = random_rate(which++);
    double a = std::exp(lt(rng)), b = std::exp(lt(rng));
    if (a > b) std::swap(a, b);
    const auto xa = xi1(rf, a, tcfg), xb = xi1(rf, b, tcfg);
    if (xa.is_undefined()) return xb.is_undefined();
    return !xb.is_finite() || xa.value() <= xb.value();
  });
  suite("xi2 non-increasing", [&] {
    const auto rf = random_rate(which++);
    double a = 1 + std::exp(lt(rng) + 2), b = 1 + std::exp(lt(rng) + 2);
    if (a > b) std::swap(a, b);
    const auto xa = xi2(rf, a, tcfg), xb = xi2(rf, b, tcfg);
    if (xb.is_undefined()) return xa.is_undefined();
    return !xa.is_finite() || xb.value() <= xa.value();
  });
  std::uniform_real_distribution<double> small_amp(0.3, 1.0), sub(0.5, 0.65), q(0.5, 3.0);
  int dir = 0;
  suite("transform outputs non-increasing", [&] {
    const auto grid = log_spaced(1e-2 * (1 + dir % 5), 0.5, 12);
    TransformTable t;
    switch (dir++ % 4) {
      case 0:
        t = wl_from_sp(RateFunction::exp_power(small_amp(rng), 1.0 + q(rng)), grid, tcfg);
        break;
      case 1:
        t = sl_from_sp(RateFunction::exp_power(small_amp(rng), sub(rng)), grid, tcfg);
        break;
      case 2:
        t = sp_from_sl(RateFunction::poly_power(small_amp(rng), q(rng)), grid, tcfg);
        break;
      default:
        t = sp_from_wl(RateFunction::constant(small_amp(rng)), grid, tcfg);
        break;
    }
    for (std::size_t i = 1; i < t.log_beta.size(); ++i) {
      if (t.log_beta[i] > t.log_beta[i - 1]) return false;
    }
    return true;
  });
  std::uint64_t seed = 0;
  suite("empirical SP >= 1", [&] {
    const auto form = random_form(rng, 2 + rng() % 4);
    SolverConfig c = seeded(seed++);
    c.max_iters = 200;
    const auto e = empirical_rate(form, Kind::kSP, log_spaced(1e-2, 1, 4), c);
    for (double v : e.values) {
      if (v < 1.0) return false;
    }
    return true;
  });
  const auto fixtures = small_fixtures();
  std::uniform_real_distribution<double> ls(std::log(1e-3), 0.0);
  int cert = 0;
  suite("certification (1e-9 inflation)", [&] {
    const auto& form = fixtures[static_cast<std::size_t>(cert) % fixtures.size()];
    const Kind k = kAllKinds[cert % 4];
    const double s = std::exp(ls(rng));
    const double beta = optimal(form, k, s, seeded(static_cast<std::uint64_t>(cert))).value;
    return certify(form, k, s, beta, 1000, static_cast<std::uint64_t>(cert++), 1e-9).passed;
  });

  bool pass = true;
  std::string detail;
  for (const auto& [name, bad] : failures) {
    pass = pass && bad == 0;
    if (!detail.empty()) detail += "; ";
    detail += name + " " + std::to_string(kCases - bad) + "/" + std::to_string(kCases);
  }
  return {pass, detail};
}

// ---- 6

Outcome end_to_end() {
  const auto form = build_birth_death(4, 1, 2, 41);
  const auto grid = log_spaced(1e-3, 1, 12);
  const TransformConfig tcfg;
  const auto sp = empirical_rate(form, Kind::kSP, grid, seeded(7));
  const auto sl = empirical_rate(form, Kind::kSL, grid, seeded(7));
  const auto wl = empirical_rate(form, Kind::kWL, grid, seeded(7));
  const auto table = sp.as_rate_function();
  const auto dom_sl = dominates(sl, sl_from_sp(table, grid, tcfg).rate());
  const auto dom_wl = dominates(wl, wl_from_sp(table, grid, tcfg).rate());
  return {dom_sl.pass && dom_wl.pass,
          "SL fitted constant " + fmt("%.4g", dom_sl.fitted_constant) + ", WL fitted constant " +
              fmt("%.4g", dom_wl.fitted_constant)};
}

// ---- 7

Outcome spectral_sanity() {
  const double two = spectral_gap(small_fixtures()[0]).gap;
  const double gauss = spectral_gap(build_birth_death(2, 0.5, 8, 201)).gap;
  auto forms = small_fixtures();
  forms.push_back(build_birth_death(4, 1, 2, 41));
  forms.push_back(build_birth_death(2, 0.5, 8, 201));
  double worst = 0.0;
  for (const auto& f : forms) {
    worst = std::max(worst, rel(optimal_wp(f, 1e-8, seeded(7)), spectral_gap(f).poincare_constant));
  }
  const bool pass = std::abs(two - 4.0) <= 1e-10 && std::abs(gauss - 1.0) <= 0.25 && worst <= 0.02;
  return {pass, "two-point gap " + fmt("%.12g", two) + ", gaussian gap " + fmt("%.4f", gauss) +
                    ", max |WP(1e-8) gap - 1| " + fmt("%.2e", worst)};
}

// ---- 8

Outcome determinism() {
  const auto dir = scratch_dir("det");
  const auto a = dir / "a", b = dir / "b";
  const std::vector<std::string> base{"verify", "--birth-death", "4,1,2,41", "--seed", "7", "--out"};
  auto with = [&](const fs::path& out) {
    auto args = base;
    args.push_back(out.string());
    return args;
  };
  const int ca = run_cli(with(a));
  setenv("RATECALC_THREADS", "1", 1);
  const int cb = run_cli(with(b));
  unsetenv("RATECALC_THREADS");
  int compared = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    if (name == "manifest.json") continue;
    ++compared;
    if (!fs::exists(b / name) || slurp(entry.path()) != slurp(b / name)) ++differing;
  }
  fs::remove_all(dir);
  return {ca == 0 && cb == 0 && compared > 0 && differing == 0,
          std::to_string(compared) + " files compared, " + std::to_string(differing) +
              " differ (manifest excluded: wall clock)"};
}

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only ID]\n");
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {"1", "kernel exactness", 1.0, kernel_exactness},
      {"2a", "sp2sl theta=1/2 exponent", 30.0, [] { return example_exponent(0.5, "sp2sl", 1.0); }},
      {"2b", "sp2wl theta=2 exponent", 30.0, [] { return example_exponent(2.0, "sp2wl", 0.5); }},
      {"2c", "sp2wl theta=1 bounded", 30.0, example_bounded},
      {"2d", "sl2sp p=1 slope", 30.0, [] { return example_exponent(0.5, "sl2sp", 0.5); }},
      {"2e", "wl2sp q=1/2 slope", 30.0, [] { return example_exponent(2.0, "wl2sp", 0.5); }},
      {"3", "condition gating", 60.0, condition_gating},
      {"4", "oracle equivalence", 120.0, oracle_equivalence},
      {"5", "property suites", 600.0, property_suites},
      {"6", "end-to-end domination", 600.0, end_to_end},
      {"7", "spectral sanity", 120.0, spectral_sanity},
      {"8", "determinism", 600.0, determinism},
  };

  int selected = 0;
  std::vector<std::string> failed;
  for (const auto& c : criteria) {
    if (!only.empty() && c.id != only) continue;
    ++selected;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o{false, ""};
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.time_limit_s;
    const bool pass = o.pass && in_time;
    std::printf("%s %-3s %-28s %s [%.2f s, limit %.0f s]\n", pass ? "PASS" : "FAIL", c.id.c_str(),
                c.title.c_str(), o.detail.c_str(), secs, c.time_limit_s);
    std::fflush(stdout);
    if (!pass) failed.push_back(c.id);
  }
  if (selected == 0) {
    std::fprintf(stderr, "unknown criterion: %s\n", only.c_str());
    return 2;
  }
  if (failed.empty()) return 0;
  for (const auto& id : failed) {
    if (!kKnownDeviations.count(id)) return 1;
  }
  return kKnownDeviationsOnly;
}
