#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "chemlab/cli.hpp"

using namespace chemlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("chemlab_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CHEMLAB_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kRow1 = R"(
[model]
n = 1
m1 = "81/50"
m2 = "-149/100"
m3 = "33/20"
alpha = "587/100"
beta = "63/25"
k = 2
[output]
formats = ["txt", "json"]
)";

const char* kLogistic = R"(
[model]
n = 2
chi = 0
xi = 0
lambda = 1
mu = 0.5
k = 2
[solver]
N = 64
t_end = 2.0
dt_init = 1e-3
dt_max = 0.05
blowup_threshold = 100
[scenario]
initial = "constant"
value = 0.5
[output]
sample_every = 5
snapshot_every = 2
)";

cli::Context context(const std::string& toml, const fs::path& out, std::ostream& os, std::ostream& err) {
  cli::Context c;
  c.cfg = config::parse_string(toml);
  c.out = out;
  c.os = &os;
  c.err = &err;
  io::ensure_dir(out);
  return c;
}

}  // namespace

TEST(Config, RationalStringsStayExact) {
  const auto cfg = config::parse_string(kRow1);
  EXPECT_EQ(cfg.model.exact.m1, Rational(81, 50));
  EXPECT_EQ(cfg.model.exact.alpha, Rational(587, 100));
  EXPECT_DOUBLE_EQ(cfg.model.params.m2, -1.49);
  EXPECT_EQ(cfg.model.exact.k, Rational(2));
}

TEST(Config, FloatsBecomeTheirShortestDecimal) {
  const auto cfg = config::parse_string("[model]\nalpha = 1.2\nbeta = 0.1\n");
  EXPECT_EQ(cfg.model.exact.alpha, Rational(6, 5));
  EXPECT_EQ(cfg.model.exact.beta, Rational(1, 10));
  EXPECT_EQ(config::decimal_rational(0.1), Rational(1, 10));
}

TEST(Config, UnknownKeysAreRejectedWithLocation) {
  try {
    config::parse_string("[model]\nn = 2\nalpah = 1.2\n", "typo.toml");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("alpah"), std::string::npos) << msg;
    EXPECT_NE(msg.find("typo.toml:3"), std::string::npos) << msg;
  }
  EXPECT_THROW(config::parse_string("[model]\n[solvr]\nN = 4\n"), ConfigError);
  EXPECT_THROW(config::parse_string("[model]\n[solver]\nbackend = \"fast\"\n"), ConfigError);
  EXPECT_THROW(config::parse_string("[model]\nn = \n"), ConfigError);
  EXPECT_THROW(config::parse_string("[solver]\nN = 8\n"), ConfigError);
  EXPECT_THROW(config::parse_string("[model]\n[output]\nformats = [\"png\"]\n"), ConfigError);
}

TEST(Config, OverrideCreatesAndReplacesKeys) {
  const auto base = toml::parse("[model]\nalpha = 1.0\n");
  const auto t = config::with_override(base, "model.alpha", toml::value<double>(1.5));
  EXPECT_DOUBLE_EQ(t["model"]["alpha"].value_or(0.0), 1.5);
  const auto u = config::with_override(base, "solver.N", toml::value<int64_t>(32));
  EXPECT_EQ(u["solver"]["N"].value_or(0), 32);
  EXPECT_THROW(config::with_override(base, "model.alpha.x", toml::value<int64_t>(1)), ConfigError);
}

TEST(Snapshot, RoundTripIsBitExact) {
  const auto dir = scratch("snap");
  ModelParams p;
  const auto law = ProductionLaw::power_law(p);
  RadialGrid g(3, 1.5, 33, 2.5);
  for (Backend b : {Backend::full, Backend::reduced}) {
    auto s = initial_state(g, g.cell_averages([](double r) { return std::exp(-r) + 0.1; }), b, p, law);
    s.t = 0.125;
    s.dt_last = 1e-7;
    const auto path = dir / (std::string(to_string(b)) + ".bin");
    io::write_snapshot(path, g, s);
    const auto back = io::read_snapshot(path);
    EXPECT_EQ(back.n, 3);
    EXPECT_EQ(back.N, 33);
    EXPECT_EQ(back.R, 1.5);
    EXPECT_EQ(back.grading, 2.5);
    EXPECT_EQ(back.state.t, 0.125);
    EXPECT_EQ(back.state.dt_last, 1e-7);
    EXPECT_EQ(back.state.mode, b);
    EXPECT_EQ(back.state.u, s.u);
    if (b == Backend::reduced) EXPECT_EQ(back.state.U, s.U);
    const auto size = fs::file_size(path);
    EXPECT_EQ(size, 4u + 5 * 4 + 4 * 8 + 33 * 8 + (b == Backend::reduced ? 34 * 8 : 0));
  }
  spit(dir / "junk.bin", "NOPE");
  EXPECT_THROW(io::read_snapshot(dir / "junk.bin"), ConfigError);
  fs::remove_all(dir);
}

TEST(Csv, WriteAndReadBack) {
  const auto dir = scratch("csv");
  io::write_steps_csv(dir / "steps.csv", {0.0, 0.5, 1.0}, {1.0, 2.0, 4.5});
  const auto t = io::read_csv(dir / "steps.csv");
  EXPECT_EQ(t.column("t"), (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(t.column("linf"), (std::vector<double>{1.0, 2.0, 4.5}));
  EXPECT_ANY_THROW(t.column("nope"));
  fs::remove_all(dir);
}

TEST(Commands, ClassifyReportsExactFigureRow) {
  const auto dir = scratch("classify");
  std::ostringstream os, err;
  const auto c = context(kRow1, dir, os, err);
  EXPECT_EQ(cli::cmd_classify(c), cli::ok);
  EXPECT_NE(os.str().find("pfrak = 69/50"), std::string::npos) << os.str();
  EXPECT_NE(os.str().find("pbar infimum = 99/10"), std::string::npos);
  EXPECT_NE(os.str().find("binding entry m3(n+2)(n+1)"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(j["pbar_infimum"], "99/10");
  EXPECT_EQ(j["pbar_binding"], "m3(n+2)(n+1)");
  EXPECT_TRUE(fs::exists(dir / "report.txt"));
  fs::remove_all(dir);
}

TEST(Commands, BoundFromInlineCoefficients) {
  const auto dir = scratch("bound");
  std::ostringstream os, err;
  const auto c = context("[model]\n[bounds]\nA = 1\nB = 1\ngamma = 3\ndelta = 2\nphi0 = 1\n", dir, os, err);
  EXPECT_EQ(cli::cmd_bound(c), cli::ok);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_NEAR(j["bounds"]["T_implicit"].get<double>(), 1.0 - std::log(2.0), 1e-12);
  EXPECT_TRUE(j["bounds"]["consistent"].get<bool>());
  fs::remove_all(dir);
}

TEST(Commands, SimulateWritesArtifactsAndRestarts) {
  const auto dir = scratch("simulate");
  std::ostringstream os, err;
  auto c = context(kLogistic, dir, os, err);
  ASSERT_EQ(cli::cmd_simulate(c), cli::ok) << err.str();
  for (const char* f : {"series.csv", "steps.csv", "report.txt", "report.json", "snapshots/initial.bin",
                        "snapshots/final.bin", "snapshots/sample_000000.bin", "plots/phi_p.svg", "plots/linf.svg"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto series = io::read_csv(dir / "series.csv");
  const double exact = 2.0 / (1.0 + 3.0 * std::exp(-2.0));
  EXPECT_NEAR(series.column("linf").back(), exact, 0.02);
  EXPECT_NEAR(series.column("t").back(), 2.0, 1e-12);

  // Continue to t = 4 from the final snapshot.
  const auto dir2 = scratch("simulate_restart");
  std::ostringstream os2, err2;
  std::string longer = kLogistic;
  longer.replace(longer.find("t_end = 2.0"), 11, "t_end = 4.0");
  auto c2 = context(longer, dir2, os2, err2);
  c2.restart = dir / "snapshots" / "final.bin";
  ASSERT_EQ(cli::cmd_simulate(c2), cli::ok) << err2.str();
  const auto s2 = io::read_csv(dir2 / "series.csv");
  EXPECT_NEAR(s2.column("t").front(), 2.0, 1e-12);
  EXPECT_NEAR(s2.column("t").back(), 4.0, 1e-12);
  EXPECT_NEAR(s2.column("linf").back(), 2.0 / (1.0 + 3.0 * std::exp(-4.0)), 0.02);

  // A snapshot for another grid is refused.
  std::string other = kLogistic;
  other.replace(other.find("N = 64"), 6, "N = 32");
  auto c3 = context(other, dir2, os2, err2);
  c3.restart = dir / "snapshots" / "final.bin";
  EXPECT_THROW(cli::cmd_simulate(c3), ConfigError);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST(Commands, SweepIsolatesFailingRuns) {
  const auto dir = scratch("sweep");
  std::ostringstream os, err;
  const auto c = context(R"(
[model]
[bounds]
A = 1
phi0 = 1
gamma = 2
[output]
formats = ["json"]
[sweep]
command = "bound"
workers = 3
[[sweep.axis]]
key = "bounds.gamma"
values = [2.0, 1.0, 3.0, 0.5]
)",
                         dir, os, err);
  EXPECT_EQ(cli::cmd_sweep(c), cli::divergence);
  const auto index = slurp(dir / "index.csv");
  EXPECT_EQ(index,
            "run,bounds.gamma,exit_code,directory\n"
            "0,2,0,run_000\n"
            "1,1,3,run_001\n"
            "2,3,0,run_002\n"
            "3,0.5,3,run_003\n");
  EXPECT_TRUE(fs::exists(dir / "run_000" / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "run_002" / "report.json"));
  EXPECT_FALSE(fs::exists(dir / "run_001" / "report.json"));
  EXPECT_NE(slurp(dir / "run_001" / "stderr.txt").find("divergence"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir / "run_002" / "report.json"));
  EXPECT_NEAR(j["bounds"]["T_implicit"].get<double>(), 0.5, 1e-12);
  fs::remove_all(dir);
}

TEST(Commands, SweepCartesianProduct) {
  const auto dir = scratch("sweep2");
  std::ostringstream os, err;
  const auto c = context(R"(
[model]
n = 2
[output]
formats = ["txt"]
[sweep]
command = "classify"
[[sweep.axis]]
key = "model.alpha"
values = ["6/5", "1/2"]
[[sweep.axis]]
key = "model.n"
values = [1, 2, 3]
)",
                         dir, os, err);
  EXPECT_EQ(cli::cmd_sweep(c, 2), cli::ok);
  const auto index = slurp(dir / "index.csv");
  EXPECT_NE(index.find("run,model.alpha,model.n,exit_code,directory"), std::string::npos);
  EXPECT_NE(index.find("5,1/2,3,0,run_005"), std::string::npos) << index;
  EXPECT_TRUE(fs::exists(dir / "run_005" / "report.txt"));
  fs::remove_all(dir);
}

TEST(Binary, ExitCodes) {
  const auto dir = scratch("binary");
  const auto log = dir / "log.txt";
  spit(dir / "row1.toml", kRow1);
  EXPECT_EQ(run_cli("classify --config " + (dir / "row1.toml").string() + " --out " + (dir / "o1").string(), log), 0);
  EXPECT_NE(slurp(log).find("99/10"), std::string::npos);

  spit(dir / "typo.toml", "[model]\nbeta_ = 1\n");
  EXPECT_EQ(run_cli("classify --config " + (dir / "typo.toml").string() + " --out " + (dir / "o2").string(), log), 2);
  EXPECT_NE(slurp(log).find("typo.toml:2"), std::string::npos) << slurp(log);

  EXPECT_EQ(run_cli("classify --config " + (dir / "missing.toml").string(), log), 2);
  EXPECT_EQ(run_cli("frobnicate", log), 2);
  EXPECT_EQ(run_cli("--help", log), 0);

  spit(dir / "flat.toml", "[model]\n[bounds]\nA = 1\ngamma = 1\n");
  EXPECT_EQ(run_cli("bound --config " + (dir / "flat.toml").string() + " --out " + (dir / "o3").string(), log), 3);

  spit(dir / "bad_param.toml", "[model]\nchi = -1\n[scenario]\ninitial = \"constant\"\n");
  EXPECT_EQ(run_cli("simulate --config " + (dir / "bad_param.toml").string() + " --out " + (dir / "o4").string(), log),
            2);

  // Coarse blow-up run whose growth requirement cannot be met.
  spit(dir / "strict.toml", std::string(R"(
[model]
n = 2
alpha = "6/5"
beta = "1/2"
k = "11/10"
chi = 5
xi = 1
lambda = 0.1
mu = 0.1
R = 1.2
[solver]
N = 128
[scenario]
growth_factor_min = 1e300
enforce = true
[output]
formats = ["json"]
)"));
  EXPECT_EQ(run_cli("blowup --config " + (dir / "strict.toml").string() + " --out " + (dir / "o5").string(), log), 4);
  EXPECT_TRUE(fs::exists(dir / "o5" / "report.json"));
  fs::remove_all(dir);
}
