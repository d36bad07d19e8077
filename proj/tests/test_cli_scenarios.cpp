#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include <mptraffic/scenarios.hpp>

using namespace mpt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("mptraffic_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(MPTRAFFIC_CLI) + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, EmptyGivesDefaults) {
  std::istringstream in("# nothing here\n\n");
  auto c = parse_config(in);
  EXPECT_EQ(dump_config(c), dump_config(ScenarioConfig{}));
  EXPECT_EQ(c.model, ClosureKind::SwitchingCurve);
  EXPECT_EQ(c.params.T, 5.0);
  EXPECT_EQ(c.dx, 0.15);
  EXPECT_EQ(c.t_end, 400.0);
}

TEST(Config, ParsesValues) {
  std::istringstream in("model = kinetic\nparams.T = 4.5  # relaxation\nprobes = -10, 2\nbottleneck.enabled = false\nmicro.N=12\n");
  auto c = parse_config(in);
  EXPECT_EQ(c.model, ClosureKind::Kinetic);
  EXPECT_EQ(c.params.T, 4.5);
  ASSERT_EQ(c.probes.size(), 2u);
  EXPECT_EQ(c.probes[1], 2.0);
  EXPECT_FALSE(c.bottleneck.enabled);
  EXPECT_EQ(c.micro.N, 12);
}

TEST(Config, ErrorsNameKeyAndLine) {
  std::istringstream bad_type("t_end = 10\nparams.T = fast\n");
  try {
    parse_config(bad_type);
    FAIL();
  } catch (const ConfigError& e) {
    std::string w = e.what();
    EXPECT_NE(w.find("params.T"), std::string::npos);
    EXPECT_NE(w.find("line 2"), std::string::npos);
  }
  std::istringstream unknown("no_such_key = 1\n");
  EXPECT_THROW(parse_config(unknown), ConfigError);
  std::istringstream no_eq("model sc\n");
  EXPECT_THROW(parse_config(no_eq), ConfigError);
  std::istringstream bad_choice("splitting = lie\n");
  EXPECT_THROW(parse_config(bad_choice), ConfigError);
}

TEST(Config, DumpRoundTrip) {
  ScenarioConfig c;
  apply_override(c, "model=sa");
  apply_override(c, "params.C=0.123456789012345");
  apply_override(c, "probes=-25,1.5");
  apply_override(c, "kinetic.relaxation=collision");
  std::istringstream in(dump_config(c));
  auto d = parse_config(in);
  EXPECT_EQ(dump_config(d), dump_config(c));
  EXPECT_EQ(d.params.C, 0.123456789012345);
}

TEST(Config, Validation) {
  ScenarioConfig c;
  EXPECT_NO_THROW(validate(c));
  c.probes = {50};
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.bottleneck.factor = 1.5;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.params.rho_j = 0.2;
  EXPECT_THROW(validate(c), DomainError);
}

TEST(Config, HelpListsEveryKey) {
  auto h = config_help();
  for (auto& k : config_keys()) EXPECT_NE(h.find(k.key), std::string::npos) << k.key;
}

TEST(Csv, TableRoundTrip) {
  UeTable t{{0, 0.5, 1}, {0.8, 0.4, 0}};
  std::stringstream ss;
  csv::write_table(ss, t);
  auto r = csv::read_table(ss);
  EXPECT_EQ(r.k, t.k);
  EXPECT_EQ(r.ue, t.ue);
  std::stringstream bad("k,u_e\n0.5,1\n0.2,1\n");
  EXPECT_THROW(csv::read_table(bad), ConfigError);
}

TEST(Scenario, FdSweepOutputs) {
  auto dir = scratch("sweep");
  ScenarioConfig c;
  c.output_dir = dir.string();
  c.sweep_n_rho = 50;
  c.kinetic_calibrate = false;
  auto rows = cmd_fd_sweep(c);
  for (auto f : {"equilibria.csv", "raster.csv", "cut.csv", "config.txt"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::ifstream in(dir / "equilibria.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "model,rho,u,stability,jump");
  std::size_t n = 0;
  int sc_stable_04 = 0;
  while (std::getline(in, line)) {
    ++n;
    std::stringstream ss(line);
    std::string model, rho, u, st, jump;
    std::getline(ss, model, ',');
    std::getline(ss, rho, ',');
    std::getline(ss, u, ',');
    std::getline(ss, st, ',');
    std::getline(ss, jump, ',');
    double r = std::stod(rho);
    if (model == "sc" && std::abs(r - 0.41) < 1e-9 && st == "stable") ++sc_stable_04;
    EXPECT_TRUE(st == "stable" || st == "unstable" || st == "continuum");
  }
  EXPECT_EQ(n, rows.size());
  EXPECT_EQ(sc_stable_04, 2);
  std::ifstream meta(dir / "config.txt");
  auto back = parse_config(meta);
  EXPECT_EQ(dump_config(back), dump_config(c));
}

TEST(Scenario, KineticTableCsvReload) {
  auto dir = scratch("table");
  ScenarioConfig c;
  c.output_dir = dir.string();
  c.kinetic_calibrate = false;
  auto ks = cmd_kinetic_table(c);
  auto t = csv::read_table((dir / "ue_table.csv").string());
  ASSERT_EQ(t.k.size(), ks.model->table().k.size());
  EXPECT_GT(t.k.size(), 201u);
  for (std::size_t i = 0; i < t.k.size(); ++i) EXPECT_EQ(t.k[i], ks.model->table().k[i]);
  for (std::size_t i = 0; i < t.k.size(); ++i) EXPECT_EQ(t.ue[i], ks.model->table().ue[i]);
  ScenarioConfig d = c;
  d.kinetic_table_in = (dir / "ue_table.csv").string();
  auto again = build_kinetic(d);
  EXPECT_NEAR(again.model->closure_u(0.4, 0.3), ks.model->closure_u(0.4, 0.3), 1e-9);
}

TEST(Scenario, MicroOutputs) {
  auto dir = scratch("micro");
  ScenarioConfig c;
  c.output_dir = dir.string();
  c.micro.N = 20;
  c.micro.t_end = 10;
  c.micro.model = MicroModelKind::atd;
  auto s = cmd_micro(c);
  EXPECT_EQ(s.trajectory.t.size(), 11u);
  std::ifstream tr(dir / "trajectory.csv");
  std::string head;
  std::getline(tr, head);
  EXPECT_EQ(head, "t,vehicle_id,x,v,a");
  std::ifstream fl(dir / "fields.csv");
  std::getline(fl, head);
  EXPECT_EQ(head, "t,x,rho,u");
}

TEST(Cli, ExitCodes) {
  auto dir = scratch("cli");
  std::string out = " --set output_dir=" + dir.string();
  EXPECT_EQ(run_cli("fd-sweep --set sweep.n_rho=20 --set kinetic.calibrate=false" + out), 0);
  EXPECT_EQ(run_cli("fd-sweep --set bogus=1" + out), 2);
  EXPECT_EQ(run_cli("fd-sweep --set params.T=slow" + out), 2);
  EXPECT_EQ(run_cli("fd-sweep --set params.rho_f=0.7" + out), 2);
  EXPECT_EQ(run_cli("fd-sweep --config /nonexistent.cfg" + out), 2);
  EXPECT_EQ(run_cli("no-such-command"), 2);
  EXPECT_EQ(run_cli(""), 2);
  // an oversized RK4 step drives vehicles into each other
  EXPECT_EQ(run_cli("micro --set micro.dt=20 --set micro.rho=0.45 --set micro.perturbation=0.9 --set micro.t_end=200" + out), 3);
}

TEST(Cli, DeterministicOutputs) {
  auto a = scratch("det_a"), b = scratch("det_b");
  std::string common = "bottleneck --set t_end=40 --set model=sa --set kinetic.calibrate=false";
  ASSERT_EQ(run_cli(common + " --set output_dir=" + a.string()), 0);
  ASSERT_EQ(run_cli(common + " --set output_dir=" + b.string()), 0);
  for (auto f : {"spacetime.csv", "metrics.csv", "scatter.csv", "probe_m20.csv", "probe_5.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  // too short for the trailing analysis window: metrics are NaN, not an error
  EXPECT_NE(slurp(a / "metrics.csv").find("nan"), std::string::npos);
  auto m1 = scratch("det_m1"), m2 = scratch("det_m2");
  std::string micro = "micro --set micro.pattern=random --set seed=42 --set micro.t_end=20";
  ASSERT_EQ(run_cli(micro + " --set output_dir=" + m1.string()), 0);
  ASSERT_EQ(run_cli(micro + " --set output_dir=" + m2.string()), 0);
  EXPECT_EQ(slurp(m1 / "trajectory.csv"), slurp(m2 / "trajectory.csv"));
}
