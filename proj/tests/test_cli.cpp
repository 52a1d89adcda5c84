#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "nfde/cli.hpp"

using namespace nfde;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nfde_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunManifest manifest(const std::string& command, const std::string& preset, const fs::path& out) {
  RunManifest m;
  m.command = command;
  m.preset = preset;
  m.out_dir = out.string();
  return m;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// Column `col` of trajectory.csv at each row, paired with t.
std::vector<std::pair<double, double>> read_column(const fs::path& p, int col) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::pair<double, double>> rows;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    rows.emplace_back(v.at(0), v.at(static_cast<std::size_t>(col)));
  }
  return rows;
}

} // namespace

TEST(Simulate, DecayMatchesExponential) {
  const fs::path dir = scratch("decay");
  RunManifest m = manifest("simulate", "decay", dir);
  m.dt = 1e-3;
  m.t_end = 5.0;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_simulate(m, out, err), exit_ok) << err.str();
  const auto rows = read_column(dir / "trajectory.csv", 1);
  ASSERT_EQ(rows.size(), 5001u);
  double worst = 0.0;
  for (const auto& [t, v] : rows) worst = std::max(worst, std::abs(v - std::exp(-t)));
  EXPECT_LE(worst, 1e-6);
  const json meta = read_json(dir / "trajectory.meta.json");
  EXPECT_EQ(meta["manifest"]["preset"], "decay");
  EXPECT_EQ(meta["manifest"]["overrides"]["dt"], 1e-3);
  EXPECT_EQ(meta["model_hash"], model_hash(preset_model("decay")));
  EXPECT_NE(meta["replay"].get<std::string>().find("--dt 0.001"), std::string::npos);
}

TEST(Simulate, KrisztinTracksSine) {
  const fs::path dir = scratch("krisztin");
  RunManifest m = manifest("simulate", "krisztin", dir);
  m.t_end = 20.0;
  m.stride = 10;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_simulate(m, out, err), exit_ok) << err.str();
  const auto rows = read_column(dir / "trajectory.csv", 1);
  ASSERT_EQ(rows.size(), 2001u);
  double worst = 0.0;
  for (const auto& [t, v] : rows) worst = std::max(worst, std::abs(v - std::sin(t)));
  EXPECT_LE(worst, 1e-2);
}

TEST(Simulate, UnstableNeutralPartExitsTwo) {
  const fs::path dir = scratch("unstable");
  json doc = preset_document("heavy-neutral");
  doc["neutral"][0]["measure"]["atoms"][0][1] = 1.2;
  const fs::path cfg = dir / "model.json";
  std::ofstream(cfg) << doc.dump();
  RunManifest m;
  m.command = "simulate";
  m.config_path = cfg.string();
  m.out_dir = dir.string();
  std::ostringstream out, err;
  EXPECT_EQ(cmd_simulate(m, out, err), exit_integration);
  EXPECT_NE(err.str().find("stability"), std::string::npos);
}

TEST(Simulate, MalformedConfigNamesKey) {
  const fs::path dir = scratch("malformed");
  json doc = preset_document("linear3");
  doc["beta"][1] = "fast";
  const fs::path cfg = dir / "model.json";
  std::ofstream(cfg) << doc.dump();
  RunManifest m;
  m.command = "simulate";
  m.config_path = cfg.string();
  m.out_dir = dir.string();
  std::ostringstream out, err;
  EXPECT_EQ(cmd_simulate(m, out, err), exit_config);
  EXPECT_NE(err.str().find("beta[1]"), std::string::npos) << err.str();
}

TEST(Simulate, RejectsPresetAndConfigTogether) {
  const fs::path dir = scratch("both");
  RunManifest m = manifest("simulate", "decay", dir);
  m.config_path = "model.json";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_simulate(m, out, err), exit_config);
  m.preset.clear();
  m.config_path = (dir / "missing.json").string();
  EXPECT_EQ(cmd_simulate(m, out, err), exit_config);
}

TEST(Certify, Linear3IsCertified) {
  const fs::path dir = scratch("cert_linear3");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_certify(manifest("certify", "linear3", dir), out, err), exit_ok) << err.str();
  const json j = read_json(dir / "certificate.json");
  EXPECT_EQ(j["model"], "linear3");
  EXPECT_EQ(j["manifest"]["command"], "certify");
  EXPECT_EQ(out.str().find("UNSAT"), std::string::npos);
}

TEST(Certify, KrisztinIsUnsat) {
  const fs::path dir = scratch("cert_krisztin");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_certify(manifest("certify", "krisztin", dir), out, err), exit_unsat);
  EXPECT_NE(out.str().find("UNSAT"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "certificate.json"));
}

TEST(Experiment, PassingRunWritesReport) {
  const fs::path dir = scratch("exp_mass");
  RunManifest m = manifest("experiment", "loop1", dir);
  m.kind = "mass";
  m.t_end = 10.0;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_experiment(m, out, err), exit_ok) << err.str();
  const json j = read_json(dir / "mass.report.json");
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_EQ(j["manifest"]["kind"], "mass");
  EXPECT_EQ(j["replay"], replay_command(m));
  EXPECT_NE(out.str().find("PASS mass drift"), std::string::npos);
}

TEST(Experiment, CanaryExitsFour) {
  const fs::path dir = scratch("exp_canary");
  RunManifest m = manifest("experiment", "canary", dir);
  m.kind = "monotone";
  m.pairs = 2;
  m.t_end = 5.0;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_experiment(m, out, err), exit_experiment);
  const json j = read_json(dir / "monotone.report.json");
  EXPECT_FALSE(j["passed"].get<bool>());
  EXPECT_TRUE(j["info"].contains("witness"));
}

TEST(Experiment, BadArgumentsAreConfigErrors) {
  const fs::path dir = scratch("exp_bad");
  RunManifest m = manifest("experiment", "linear3", dir);
  m.kind = "bogus";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_experiment(m, out, err), exit_config);
  m.kind = "monotone";
  m.tolerances["bogus"] = 1.0;
  EXPECT_EQ(cmd_experiment(m, out, err), exit_config);
  EXPECT_NE(err.str().find("tol.bogus"), std::string::npos);
  m.tolerances = {{"cone", -1.0}};
  EXPECT_EQ(cmd_experiment(m, out, err), exit_config);
  m.tolerances.clear();
  m.pairs = 0;
  EXPECT_EQ(cmd_experiment(m, out, err), exit_config);
}

TEST(Experiment, ToleranceOverridesReachSpec) {
  RunManifest m = manifest("experiment", "linear3", ".");
  m.kind = "cover";
  m.tolerances = {{"cover", 1e-3}, {"amplitude", 0.5}};
  m.seed = 7;
  const ExperimentSpec spec = experiment_spec(m);
  EXPECT_EQ(spec.tol.cover, 1e-3);
  EXPECT_EQ(spec.tol.amplitude, 0.5);
  EXPECT_EQ(spec.seed, 7u);
  EXPECT_EQ(spec.kind, ExperimentKind::cover);
  EXPECT_NE(spec.replay.find("--tol cover=0.001"), std::string::npos);
}
