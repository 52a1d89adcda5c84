#include <cmath>

#include <gtest/gtest.h>

#include "nfde/labsuite.hpp"
#include "nfde/presets.hpp"
#include "support.hpp"

using namespace nfde;
using nfde::test::vec;

namespace {

ExperimentSpec spec_for(const std::string& preset, ExperimentKind kind, double dt, double t_end) {
  const json doc = preset_document(preset);
  ExperimentSpec spec;
  spec.model = model_from_json(doc);
  spec.kind = kind;
  spec.initial = doc.at("initial");
  spec.dt = dt;
  spec.t_end = t_end;
  return spec;
}

const Assertion& get(const ExperimentReport& rep, const std::string& name) {
  const Assertion* a = rep.find(name);
  if (!a) throw std::runtime_error("missing assertion " + name);
  return *a;
}

} // namespace

TEST(Monotone, EqualPairStaysOrdered) {
  const ExperimentSpec spec = spec_for("linear3", ExperimentKind::monotone, 0.01, 5.0);
  const auto r = lab::run(spec, lab::initial_datum(spec), spec.t_end);
  const ConeParams cone = lab::experiment_cone(spec.model, lab::history_horizon(spec));
  const auto margins = lab::order_margins(r.trajectory, r.trajectory, cone, lab::checkpoints(1.0, 5.0));
  ASSERT_EQ(margins.size(), 5u);
  for (double m : margins) EXPECT_EQ(m, 0.0);
}

TEST(Monotone, Linear3Passes) {
  ExperimentSpec spec = spec_for("linear3", ExperimentKind::monotone, 1e-3, 10.0);
  spec.pairs = 6;
  const ExperimentReport rep = run_monotone(spec);
  EXPECT_TRUE(rep.passed());
  EXPECT_GE(get(rep, "order preserved at checkpoints").value, -1e-7);
  EXPECT_LE(get(rep, "ordered-pair stability bound").value, 1e-5);
}

TEST(Monotone, KrisztinPairsStayOrderedWithoutCertificate) {
  ExperimentSpec spec = spec_for("krisztin", ExperimentKind::monotone, 1e-3, 20.0);
  spec.pairs = 4;
  const ExperimentReport rep = run_monotone(spec);
  EXPECT_FALSE(get(rep, "precondition F4").passed);
  EXPECT_TRUE(get(rep, "order preserved at checkpoints").passed);
  EXPECT_TRUE(rep.info.contains("witness"));
}

TEST(Monotone, CanaryFailsWithWitness) {
  ExperimentSpec spec = spec_for("canary", ExperimentKind::monotone, 0.01, 5.0);
  spec.pairs = 2;
  const ExperimentReport rep = run_monotone(spec);
  EXPECT_FALSE(rep.passed());
  EXPECT_LT(get(rep, "precondition F4").value, 0.0);
  ASSERT_TRUE(rep.info.contains("witness"));
  EXPECT_TRUE(rep.info["witness"].contains("x"));
  EXPECT_TRUE(rep.info["witness"].contains("y"));
}

TEST(Mass, ZeroDatumHasNoDrift) {
  ExperimentSpec spec = spec_for("linear3", ExperimentKind::mass, 0.01, 10.0);
  spec.initial = {{"kind", "constant"}, {"value", 0.0}};
  const ExperimentReport rep = run_mass(spec);
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(get(rep, "mass drift").value, 0.0);
}

TEST(Mass, ScalarLoopConstantDatum) {
  ExperimentSpec spec = spec_for("loop1", ExperimentKind::mass, 1e-3, 100.0);
  const ExperimentReport rep = run_mass(spec);
  EXPECT_TRUE(rep.passed());
  EXPECT_LE(get(rep, "mass drift").value, 1e-6);
}

TEST(Mass, ScalarLoopOscillatingDatumConvergesAtSecondOrder) {
  ExperimentSpec spec = spec_for("loop1", ExperimentKind::mass, 0.01, 20.0);
  spec.initial = {{"kind", "sin"}, {"offset", 1.0}, {"amplitude", 0.5}, {"frequency", 3.0}};
  const ExperimentReport rep = run_mass(spec);
  EXPECT_TRUE(rep.passed());
  const double ratio = get(rep, "drift ratio under step halving").value;
  EXPECT_GE(ratio, 3.0);
  EXPECT_LE(ratio, 5.0);
}

TEST(Converge, AutonomousModelSettles) {
  ExperimentSpec spec = spec_for("linear3", ExperimentKind::converge, 0.01, 150.0);
  spec.tol.conv = 1e-6;
  const ExperimentReport rep = run_converge(spec);
  EXPECT_TRUE(rep.passed()) << to_json(rep).dump();
  EXPECT_TRUE(rep.info["certified"].get<bool>());
}

TEST(Converge, PeriodicModelRecurs) {
  ExperimentSpec spec = spec_for("neutral-ring", ExperimentKind::converge, 0.01, 200.0);
  const ExperimentReport rep = run_converge(spec);
  EXPECT_TRUE(rep.passed()) << to_json(rep).dump();
  EXPECT_LE(get(rep, "period residual at t_end (initial)").value, 1e-4);
  EXPECT_TRUE(rep.info.contains("merge"));
}

TEST(Converge, KrisztinKeepsOscillating) {
  ExperimentSpec spec = spec_for("krisztin", ExperimentKind::converge, 1e-3, 50.0);
  const ExperimentReport rep = run_converge(spec);
  EXPECT_FALSE(rep.info["certified"].get<bool>());
  EXPECT_TRUE(rep.passed());
  EXPECT_GE(get(rep, "oscillation persists (initial)").value, 0.1);
  EXPECT_GE(get(rep, "oscillation persists (second)").value, 0.1);
}

TEST(Cover, AutonomousLateSectionsCoincide) {
  ExperimentSpec spec = spec_for("linear3", ExperimentKind::cover, 0.01, 150.0);
  const ExperimentReport rep = run_cover(spec);
  EXPECT_TRUE(rep.passed()) << to_json(rep).dump();
  EXPECT_LE(get(rep, "late-section dispersion").value, 1e-6);
  EXPECT_TRUE(rep.info["equal_mass"].contains("coincide"));
}

TEST(Superq, SingleEquilibriumIsItsOwnInfimum) {
  const auto cone = ConeParams::diagonal(vec({2.0}));
  const History e = History::constant(vec({1.7}), 0.01, 1.0);
  const History one[] = {e};
  EXPECT_LE((cone_infimum(std::span<const History>(one), cone) - e).sup_norm(), 1e-15);

  ExperimentSpec spec = spec_for("loop1", ExperimentKind::superq, 0.01, 10.0);
  const ExperimentReport rep = run_superq(spec);
  EXPECT_TRUE(rep.passed());
}

TEST(Superq, TwoSectionsGiveTheirInfimum) {
  ExperimentSpec spec = spec_for("neutral-ring", ExperimentKind::superq, 0.01, 4.0);
  spec.burn_in = 0.5;
  spec.sections = 2;
  const ExperimentReport rep = run_superq(spec);
  const auto times = rep.info["section_times"].get<std::vector<double>>();
  ASSERT_EQ(times.size(), 2u);
  const double horizon = lab::history_horizon(spec);
  const auto r = lab::run(spec, lab::initial_datum(spec), spec.t_end);
  const History x = r.trajectory.section(times[0], horizon), y = r.trajectory.section(times[1], horizon);
  const History a = cone_infimum(x, y, lab::experiment_cone(spec.model, horizon));
  const auto& stored = rep.info["a"];
  double diff = 0.0;
  for (long k = 0; k < a.nodes(); ++k)
    for (int i = 0; i < 3; ++i) diff = std::max(diff, std::abs(stored["components"][i][k].get<double>() - a.samples()(i, k)));
  EXPECT_LE(diff, 1e-12);
}

TEST(Superq, PeriodicModelMargins) {
  ExperimentSpec spec = spec_for("neutral-ring", ExperimentKind::superq, 0.01, 100.0);
  const ExperimentReport rep = run_superq(spec);
  EXPECT_TRUE(rep.passed()) << to_json(rep).dump();
}

TEST(Report, IsDeterministicAndReplayable) {
  ExperimentSpec spec = spec_for("linear3", ExperimentKind::monotone, 0.01, 3.0);
  spec.pairs = 3;
  spec.replay = "nfde experiment monotone --preset linear3 --seed 1";
  const std::string a = to_json(run_experiment(spec)).dump();
  const std::string b = to_json(run_experiment(spec)).dump();
  EXPECT_EQ(a, b);
  const json j = json::parse(a);
  EXPECT_EQ(j["replay"], spec.replay);
  EXPECT_EQ(j["provenance"]["model_hash"], model_hash(spec.model));
  spec.seed = 2;
  EXPECT_NE(to_json(run_experiment(spec)).dump(), a);
}

TEST(Report, KindNamesRoundTrip) {
  for (auto k : {ExperimentKind::monotone, ExperimentKind::mass, ExperimentKind::converge, ExperimentKind::cover,
                 ExperimentKind::superq})
    EXPECT_EQ(parse_kind(kind_name(k)), k);
  EXPECT_FALSE(parse_kind("bogus").has_value());
}
