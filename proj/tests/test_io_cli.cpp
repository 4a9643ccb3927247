#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ratecalc/cli.hpp"

using namespace ratecalc;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ratecalc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("ratecalc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string file(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p) << content;
    return p.string();
  }

 private:
  fs::path path_;
};

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) rows.push_back(cli::detail::split(line, ','));
  return rows;
}

}  // namespace

TEST(FormatDouble, RoundTrips) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> ex(-300, 300);
  for (int trial = 0; trial < 200; ++trial) {
    const double x = mant(rng) * std::pow(10.0, ex(rng));
    EXPECT_EQ(std::stod(io::format_double(x)), x);
  }
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(io::format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(io::format_double(std::nan("")), "nan");
}

TEST(RateFunctionJson, RoundTripsEveryFamily) {
  const std::vector<std::pair<double, double>> pts{{0.1, 3.0}, {1.0, 2.0}};
  for (const auto& rf : {RateFunction::exp_power(1.5, 0.75), RateFunction::poly_power(2, 1.25),
                         RateFunction::log_power(0.5, 0.5), RateFunction::inverse_power(3, 2),
                         RateFunction::constant(4), RateFunction::tabulated(pts)}) {
    const json j = io::to_json(rf);
    const auto back = io::rate_function_from_json(j);
    EXPECT_EQ(io::to_json(back), j);
    for (double s : {0.05, 0.3, 2.0}) EXPECT_EQ(back.eval(s), rf.eval(s));
  }
}

TEST(RateFunctionJson, RejectsBadDocuments) {
  EXPECT_THROW(io::rate_function_from_json(json::parse(R"({"family":"exp_power","C":1,"theta":1,"x":2})")), InputError);
  EXPECT_THROW(io::rate_function_from_json(json::parse(R"({"family":"gamma"})")), InputError);
  EXPECT_THROW(io::rate_function_from_json(json::parse(R"({"family":"constant"})")), InputError);
  EXPECT_THROW(io::rate_function_from_json(json::parse(R"({"family":"constant","B":"two"})")), InputError);
  EXPECT_THROW(io::rate_function_from_json(json::parse(R"([1,2])")), InputError);
  EXPECT_THROW(io::rate_function_from_json(json::parse(R"({"family":"exp_power","C":1,"theta":0.2})")), ConfigError);
  EXPECT_THROW(io::rate_function_from_json(json::parse(R"({"family":"table","points":[[1,2,3]]})")), InputError);
}

TEST(RunConfigJson, DefaultsOverridesAndStrictKeys) {
  const auto def = io::run_config_from_json(json::object());
  EXPECT_EQ(def.transform.delta, TransformConfig{}.delta);
  EXPECT_FALSE(def.transform.n0.has_value());
  const auto rc = io::run_config_from_json(json::parse(
      R"({"delta":5,"n0":3,"s0":null,"C2":2,"r_grid":{"count":5001},"solver":{"restarts":30,"seed":9}})"));
  EXPECT_EQ(rc.transform.delta, 5.0);
  EXPECT_EQ(rc.transform.n0, 3);
  EXPECT_FALSE(rc.transform.s0.has_value());
  EXPECT_EQ(rc.transform.C2, 2.0);
  EXPECT_EQ(rc.transform.r_grid.count, 5001);
  EXPECT_EQ(rc.solver.restarts, 30);
  EXPECT_EQ(rc.solver.seed, 9u);
  EXPECT_THROW(io::run_config_from_json(json::parse(R"({"deltaa":5})")), InputError);
  EXPECT_THROW(io::run_config_from_json(json::parse(R"({"solver":{"restart":30}})")), InputError);
  EXPECT_THROW(io::run_config_from_json(json::parse(R"({"solver":{"restarts":10}})")), ConfigError);
  EXPECT_THROW(io::run_config_from_json(json::parse(R"({"delta":1.5})")), ConfigError);
}

TEST(FormJson, RoundTripAndErrors) {
  const FiniteDirichletForm form({0.2, 0.3, 0.5}, {{0, 1, 1.5}, {1, 2, 0.25}});
  const auto back = io::form_from_json(io::to_json(form));
  EXPECT_EQ(back.mu(), form.mu());
  const std::vector<double> f{1, -2, 4};
  EXPECT_EQ(energy(back, f), energy(form, f));
  EXPECT_THROW(io::form_from_json(json::parse(R"({"mu":[0.5,0.5],"edges":[[0,1]]})")), InputError);
  EXPECT_THROW(io::form_from_json(json::parse(R"({"mu":[0.5,0.5],"edges":[[0.5,1,1]]})")), InputError);
  EXPECT_THROW(io::form_from_json(json::parse(R"({"mu":[0.5,0.5],"edges":[],"n":2})")), InputError);
}

TEST(Csv, XiRowsAndUndefined) {
  const auto text = io::xi_csv({0.5, 4.0}, {ExtendedValue::finite(2.0), ExtendedValue::undefined()});
  const auto rows = read_csv(text);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "xi"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"0.5", "2"}));
  EXPECT_EQ(rows[2], (std::vector<std::string>{"4", "undefined"}));
  EXPECT_EQ(read_csv(io::rate_csv(std::vector<double>{1.0}, std::vector<double>{0.1}))[0],
            (std::vector<std::string>{"s", "beta"}));
}

TEST(Cli, XiInverseRate) {
  TempDir tmp;
  const auto rf = tmp.file("inv.json", R"({"family":"inverse_power","a":1,"p":1})");
  const auto r = run_cli({"xi", "xi1", "--ratefn", rf, "--t", "0.25,0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(r.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "xi"}));
  EXPECT_NEAR(std::stod(rows[1][1]), 1.0, 1e-4);
  EXPECT_NEAR(std::stod(rows[2][1]), 2.0, 1e-4);
  // manifest goes to stderr when there is no output directory
  const auto manifest = json::parse(r.err);
  EXPECT_EQ(manifest["command"], "xi");
  EXPECT_EQ(manifest["exit_code"], 0);
}

TEST(Cli, XiUndefinedRow) {
  TempDir tmp;
  const auto rf = tmp.file("c.json", R"({"family":"constant","B":5})");
  const auto r = run_cli({"xi", "xi2", "--ratefn", rf, "--t", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_csv(r.out)[1], (std::vector<std::string>{"4", "undefined"}));
}

TEST(Cli, ConditionFailureExitsFour) {
  TempDir tmp;
  const auto rf = tmp.file("e.json", R"({"family":"exp_power","C":1,"theta":1})");
  const auto r = run_cli({"transform", "sp2sl", "--ratefn", rf, "--s-grid", "1e-3,1e-1,12", "--out",
                          (tmp.path() / "o").string()});
  EXPECT_EQ(r.code, 4) << r.err;
  const auto manifest = json::parse(slurp(tmp.path() / "o" / "manifest.json"));
  EXPECT_EQ(manifest["exit_code"], 4);
  EXPECT_EQ(manifest["pass"], false);
}

TEST(Cli, ConfigErrorsExitTwo) {
  TempDir tmp;
  const auto rf = tmp.file("e.json", R"({"family":"exp_power","C":1,"theta":1})");
  EXPECT_EQ(run_cli({"example11", "--theta", "0.75", "--branch", "sp2wl"}).code, 2);
  EXPECT_EQ(run_cli({"transform", "sp2sl", "--ratefn", rf}).code, 2);
  EXPECT_EQ(run_cli({"transform", "sideways", "--ratefn", rf, "--s-grid", "1e-3,1,8"}).code, 2);
  EXPECT_EQ(run_cli({"xi", "xi1", "--ratefn", tmp.file("bad.json", "{not json")}).code, 2);
  EXPECT_EQ(run_cli({"xi", "xi1", "--ratefn", rf, "--t", "0.1", "--config",
                     tmp.file("cfg.json", R"({"solver":{"restarts":3}})")}).code, 2);
  EXPECT_EQ(run_cli({"verify"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
}

TEST(Cli, DisconnectedFormExitsThree) {
  TempDir tmp;
  const auto form = tmp.file("f.json", R"({"mu":[0.25,0.25,0.25,0.25],"edges":[[0,1,1],[2,3,1]]})");
  EXPECT_EQ(run_cli({"verify", "--form", form}).code, 3);
  EXPECT_EQ(run_cli({"spectrum", "--form", form}).code, 3);
}

TEST(Cli, CapErrorExitsFive) {
  TempDir tmp;
  const auto rf = tmp.file("inv.json", R"({"family":"inverse_power","a":1,"p":1})");
  const auto cfg = tmp.file("cfg.json", R"({"n0":2,"k_max":5})");
  EXPECT_EQ(run_cli({"transform", "sp2wl", "--ratefn", rf, "--s-grid", "1e-6,1e-5,8", "--config", cfg}).code, 5);
}

TEST(Cli, TransformSlToSpSlope) {
  TempDir tmp;
  const auto rf = tmp.file("p.json", R"({"family":"poly_power","C":1,"p":1})");
  const auto out = tmp.path() / "o";
  const auto r = run_cli({"transform", "sl2sp", "--ratefn", rf, "--s-grid", "1e-4,1e-2,16", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(slurp(out / "transform.csv"));
  std::vector<double> s, log_beta;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    s.push_back(std::stod(rows[i][0]));
    log_beta.push_back(std::log(std::stod(rows[i][1])));
  }
  EXPECT_NEAR(fit_exponent_from_logs(s, log_beta, FitModel::kLogOfLog, {1e-4, 1e-2}), 0.5, 0.15);
  EXPECT_TRUE(fs::exists(out / "transform.json"));
}

TEST(Cli, SpectrumAndOptimal) {
  TempDir tmp;
  const auto form = tmp.file("f.json", R"({"mu":[0.5,0.5],"edges":[[0,1,1]]})");
  const auto g = run_cli({"spectrum", "--form", form});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_NEAR(json::parse(g.out)["gap"].get<double>(), 4.0, 1e-10);
  const auto o = run_cli({"optimal", "--form", form, "--kind", "WP", "--s", "1e-12"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NEAR(json::parse(o.out)["value"].get<double>(), 0.25, 1e-6);
  EXPECT_EQ(run_cli({"optimal", "--form", form, "--kind", "XX", "--s", "0.1"}).code, 2);
}

TEST(Cli, VerifyTwoPointPasses) {
  TempDir tmp;
  const auto form = tmp.file("f.json", R"({"mu":[0.5,0.5],"edges":[[0,1,1]]})");
  const auto out = tmp.path() / "o";
  const auto r = run_cli({"verify", "--form", form, "--seed", "7", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(slurp(out / "report.json"));
  EXPECT_TRUE(report["pass"].get<bool>());
  EXPECT_NEAR(report["gap"].get<double>(), 4.0, 1e-10);
}

TEST(Cli, VerifyPrintsReportWithoutOutDir) {
  const auto r = run_cli({"verify", "--birth-death", "4,1,2,21", "--s-grid", "1e-2,1,4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(json::parse(r.out).contains("domination"));
}

TEST(Cli, ManifestWrittenLastAndListsExistingFiles) {
  TempDir tmp;
  const auto out = tmp.path() / "o";
  const auto r = run_cli({"verify", "--birth-death", "4,1,2,21", "--seed", "7", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest_path = out / "manifest.json";
  const auto manifest = json::parse(slurp(manifest_path));
  EXPECT_EQ(manifest["seed"], 7);
  EXPECT_EQ(manifest["pass"], true);
  const auto outputs = manifest["outputs"].get<std::vector<std::string>>();
  EXPECT_EQ(outputs.size(), 11u);
  for (const auto& p : outputs) {
    ASSERT_TRUE(fs::exists(p)) << p;
    EXPECT_LE(fs::last_write_time(p), fs::last_write_time(manifest_path));
  }
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& entry : fs::directory_iterator(out)) ++files;
  EXPECT_EQ(files, outputs.size() + 1);
}

TEST(Cli, VerifyIsDeterministic) {
  TempDir tmp;
  const auto a = tmp.path() / "a", b = tmp.path() / "b";
  ASSERT_EQ(run_cli({"verify", "--birth-death", "4,1,2,21", "--seed", "7", "--out", a.string()}).code, 0);
  setenv("RATECALC_THREADS", "1", 1);
  ASSERT_EQ(run_cli({"verify", "--birth-death", "4,1,2,21", "--seed", "7", "--out", b.string()}).code, 0);
  unsetenv("RATECALC_THREADS");
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    if (name == "manifest.json") continue;
    EXPECT_EQ(slurp(entry.path()), slurp(b / name)) << name;
  }
  const auto other = tmp.path() / "c";
  ASSERT_EQ(run_cli({"verify", "--birth-death", "4,1,2,21", "--seed", "8", "--out", other.string()}).code, 0);
  EXPECT_NE(slurp(a / "empirical_wl.json"), slurp(other / "empirical_wl.json"));
}

TEST(Cli, Example11ReportsFit) {
  const auto r = run_cli({"example11", "--theta", "0.5", "--branch", "sl2sp"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = json::parse(r.out);
  EXPECT_EQ(rep["predicted"].get<double>(), 0.5);
  EXPECT_NEAR(rep["fitted"].get<double>(), 0.5, 0.15);
  EXPECT_TRUE(rep["pass"].get<bool>());
}
