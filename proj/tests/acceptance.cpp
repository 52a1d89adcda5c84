// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nfde/cli.hpp"
#include "nfde/presets.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace nfde;
using nfde::test::vec;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    passed = passed && ok;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "!") + what;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

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

double value_of(const ExperimentReport& rep, const std::string& name) {
  const Assertion* a = rep.find(name);
  return a ? a->value : NAN;
}

bool passed(const ExperimentReport& rep, const std::string& name) {
  const Assertion* a = rep.find(name);
  return a && a->passed;
}

IntegrationResult krisztin_run(double dt) {
  const CompartmentModel model = preset_model("krisztin");
  IntegratorConfig cfg;
  cfg.dt = dt;
  cfg.t_end = 50.0;
  return integrate(model, test::scalar_fn(dt, model.horizon(), [](double s) { return std::sin(s); }), cfg);
}

double sine_error(const Trajectory& z, double dt) {
  double err = 0.0;
  for (long n = 0; n <= z.last(); ++n) err = std::max(err, std::abs(z.value(n, 0) - std::sin(static_cast<double>(n) * dt)));
  return err;
}

Outcome criterion_1() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const double e1 = sine_error(krisztin_run(1e-3).trajectory, 1e-3);
  const double elapsed = seconds_since(start);
  const double e2 = sine_error(krisztin_run(5e-4).trajectory, 5e-4);
  o.require(e1 <= 1e-2, "max |z - sin| = " + fmt(e1));
  o.require(elapsed < 10.0, "runtime " + fmt(elapsed) + " s");
  o.require(e1 / e2 >= 3.0 && e1 / e2 <= 5.0, "halving ratio " + fmt(e1 / e2));
  return o;
}

Outcome criterion_2() {
  Outcome o;
  const double dt = 1e-3, c = std::numbers::sqrt2 - 1.0, tau = std::numbers::pi / 4.0, sigma = 7.0 * std::numbers::pi / 4.0;
  const auto r = krisztin_run(dt);
  const Trajectory& z = r.trajectory;
  auto y = [&](double t) { return z.component_at(t, 0) - c * z.component_at(t - tau, 0); };
  double worst = 0.0;
  for (long n = std::lround(1.0 / dt); n < std::lround(50.0 / dt); ++n) {
    const double t = static_cast<double>(n) * dt;
    const double lhs = (y(t + dt) - y(t - dt)) / (2.0 * dt);
    const double rhs = -z.component_at(t, 0) + z.component_at(t - sigma, 0);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  o.require(worst <= 1e-4, "neutral residual on [1, 50] = " + fmt(worst));
  return o;
}

ExperimentReport linear3_monotone(double& elapsed) {
  ExperimentSpec spec = spec_for("linear3", ExperimentKind::monotone, 1e-3, 100.0);
  spec.pairs = 50;
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport rep = run_monotone(spec);
  elapsed = seconds_since(start);
  return rep;
}

Outcome criterion_3(const ExperimentReport& rep, double elapsed) {
  Outcome o;
  o.require(certify(preset_model("linear3")).all_sat(), "linear3 certified");
  o.require(passed(rep, "order preserved at checkpoints"),
            "worst cone margin " + fmt(value_of(rep, "order preserved at checkpoints")) + " over 50 pairs x 100 checkpoints");
  o.require(passed(rep, "precondition F4"), "F4 margin " + fmt(value_of(rep, "precondition F4")));
  o.require(elapsed < 60.0, "runtime " + fmt(elapsed) + " s");
  return o;
}

Outcome criterion_4() {
  Outcome o;
  const ExperimentReport rep = run_mass(spec_for("linear3", ExperimentKind::mass, 1e-3, 100.0));
  o.require(passed(rep, "mass drift"), "drift " + fmt(value_of(rep, "mass drift")));
  o.require(passed(rep, "drift ratio under step halving"), "ratio " + fmt(value_of(rep, "drift ratio under step halving")));
  return o;
}

Outcome criterion_5(const ExperimentReport& rep) {
  Outcome o;
  o.require(passed(rep, "ordered-pair stability bound"),
            "worst excess over bound " + fmt(value_of(rep, "ordered-pair stability bound")));
  return o;
}

Outcome criterion_6() {
  Outcome o;
  const ExperimentSpec base = spec_for("neutral-ring", ExperimentKind::converge, 0.0025, 500.0);
  const ExperimentReport conv = run_converge(base);
  o.require(passed(conv, "period residual at t_end (initial)"),
            "r(500) initial " + fmt(value_of(conv, "period residual at t_end (initial)")));
  o.require(passed(conv, "period residual at t_end (second)"),
            "r(500) second " + fmt(value_of(conv, "period residual at t_end (second)")));
  ExperimentSpec cover = base;
  cover.kind = ExperimentKind::cover;
  const ExperimentReport cov = run_cover(cover);
  o.require(passed(cov, "distinct-mass separation"),
            "separation " + fmt(value_of(cov, "distinct-mass separation")) + " vs 10 tol " + fmt(10.0 * cover.tol.cover));
  const ExperimentReport torus = run_converge(spec_for("neutral-torus", ExperimentKind::converge, 0.01, 500.0));
  o.require(torus.passed(), "torus recurrence residual decays (late median " +
                                fmt(value_of(torus, "decaying recurrence residual (initial)")) + ")");
  return o;
}

Outcome criterion_7() {
  Outcome o;
  auto scan_agrees = [&](const CertReport& rep, const char* name, double bound,
                         const std::function<double(double)>& phi, const std::string& label) {
    const auto* h = rep.find(name, 0);
    const auto [arg, best] = oracle::brute_scan(phi);
    const bool brute_sat = best > bound;
    o.require(h && h->sat == brute_sat && std::abs(h->margin + bound - best) <= 1e-6,
              label + (brute_sat ? " SAT" : " UNSAT") + " (scan max " + fmt(best) + ")");
  };
  auto phi_h = [](double b) { return b * (1.0 - 0.5 * std::exp(b)); };
  scan_agrees(check_H(test::scalar_loop(0.05, 1.0, 0.5, 1.0)), "H5", 0.05, phi_h, "L+ = 0.05");
  scan_agrees(check_H(test::scalar_loop(0.2, 1.0, 0.5, 1.0)), "H5", 0.2, phi_h, "L+ = 0.2");
  const double c = std::numbers::sqrt2 - 1.0, tau = std::numbers::pi / 4.0;
  scan_agrees(check_G(preset_model("krisztin")), "G5", 1.0, [&](double b) { return b * (1.0 - c * std::exp(b * tau)); },
              "Krisztin G5");
  RunManifest m;
  m.command = "certify";
  m.preset = "krisztin";
  m.out_dir = (std::filesystem::temp_directory_path() / "nfde_acceptance_certify").string();
  std::ostringstream out, err;
  const int code = cmd_certify(m, out, err);
  o.require(code == exit_unsat, "certify krisztin exit " + std::to_string(code));
  return o;
}

NeutralOperator random_stable_operator(std::mt19937_64& rng, int m, double gamma_max) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<DelayMeasure> diag;
  const double total = gamma_max * u(rng);
  for (int i = 0; i < m; ++i) {
    const double split = u(rng);
    DelayMeasure::Density d{0.1, std::vector<double>(10, 0.0)};
    for (std::size_t k = 1; k < d.cells.size(); ++k) d.cells[k] = (1.0 - split) * total / 9.0;
    diag.emplace_back(std::vector<DelayMeasure::Atom>{{-0.1 * static_cast<double>(1 + rng() % 20), split * total}},
                      std::move(d));
  }
  return NeutralOperator::diagonal(diag);
}

Outcome criterion_8() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_ratio = 0.0;
  int over_bound = 0, negative = 0;
  for (int n = 0; n < 100; ++n) {
    const int m = 1 + n % 3;
    const NeutralOperator D = random_stable_operator(rng, m, 0.9);
    const double gamma = D.contraction_bound();
    const History x = random_lipschitz_history(m, 0.02, 4.0, rng, 0.0, 1.0);
    const auto r = invert_Dhat(D, apply_Dhat(D, x), 1e-12);
    worst_ratio = std::max(worst_ratio, (r.x - x).sup_norm() * (1.0 - gamma) / 1e-10);
    const History h = apply_Dhat(D, x);
    if (r.iterations > neumann_iteration_bound(gamma, h.sup_norm(), 1e-12)) ++over_bound;
    const History pos = x.shifted(Eigen::VectorXd::Constant(m, -x.samples().minCoeff()));
    if (invert_Dhat(D, pos, 1e-12).x.samples().minCoeff() < 0.0) ++negative;
  }
  o.require(worst_ratio <= 1.0, "worst roundtrip / (1e-10/(1-gamma)) = " + fmt(worst_ratio));
  o.require(over_bound == 0, std::to_string(over_bound) + " runs over the iteration bound");
  o.require(negative == 0, std::to_string(negative) + " positivity violations");
  return o;
}

Outcome criterion_9() {
  Outcome o;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double step = 0.01, horizon = 4.0;
  double worst_idem = 0.0, worst_lower = INFINITY, worst_reduce = 0.0;
  bool lower_ok = true;
  for (int n = 0; n < 200; ++n) {
    const Eigen::VectorXd beta = vec({0.5 + 2.5 * u(rng), 0.5 + 2.5 * u(rng)});
    const Eigen::MatrixXd A = (-beta).asDiagonal();
    const ConeParams cone = n % 2 == 0 ? ConeParams::diagonal(beta) : ConeParams::finite_window(A, 2.0);
    const double window = cone.mode == ConeMode::full_line ? horizon : cone.window;
    const double tol = step * step * window;
    const History x = random_lipschitz_history(2, step, horizon, rng);
    const History y = random_lipschitz_history(2, step, horizon, rng);
    worst_idem = std::max(worst_idem, (cone_infimum(x, x, cone) - x).sup_norm());
    const History a = cone_infimum(x, y, cone);
    const double lower = std::min(order_margin(a, x, cone), order_margin(a, y, cone));
    worst_lower = std::min(worst_lower, lower);
    lower_ok = lower_ok && lower >= -tol;
    const History above = x + random_cone_element(cone, step, horizon, rng);
    worst_reduce = std::max(worst_reduce, (cone_infimum(x, above, cone) - x).sup_norm());
  }
  o.require(worst_idem <= step * step, "idempotence " + fmt(worst_idem));
  o.require(lower_ok, "lower-bound margin " + fmt(worst_lower));
  o.require(worst_reduce <= step * step, "reduction " + fmt(worst_reduce));

  const std::vector<ConeParams> cones = {
      ConeParams::diagonal(vec({0.7, 2.0})),
      ConeParams::full_line(test::mat2(-2.0, 0.5, 0.3, -1.5)),
      ConeParams::finite_window(test::mat2(-1.0, 0.8, 0.0, -0.4), 0.3),
  };
  int mismatches = 0, cases = 0;
  for (const auto& cone : cones)
    for (int n = 0; n < 100; ++n) {
      const double h = 1.0 / static_cast<double>(8 + n % 56);  // 9 to 64 nodes
      History w = random_cone_element(cone, h, 1.0, rng);
      if (n % 3 == 1) {
        const long k = 1 + static_cast<long>(rng() % static_cast<unsigned long>(w.intervals()));
        w.samples()(static_cast<int>(rng() % 2), k) -= 1e-3;
      } else if (n % 3 == 2) {
        const double phase = u(rng);
        w = History::sample(2, h, 1.0, [&](double s) {
          return vec({0.5 + 0.4 * std::sin(3.0 * s + phase), 0.5 + 0.4 * std::cos(5.0 * s)});
        });
      }
      ++cases;
      if (cone_contains(w, cone) != oracle::all_pairs_contains(w, cone)) ++mismatches;
    }
  o.require(mismatches == 0, "adjacent vs all-pairs mismatches " + std::to_string(mismatches) + "/" + std::to_string(cases));
  return o;
}

Outcome criterion_10() {
  Outcome o;
  const CertReport rep = check_F4_F6(preset_model("canary"), 1000);
  const auto* f4 = rep.find("F4");
  o.require(f4 && !f4->sat && f4->margin < 0.0, "F4 margin " + fmt(f4 ? f4->margin : NAN));
  return o;
}

} // namespace

int main() {
  double monotone_seconds = 0.0;
  const ExperimentReport monotone = linear3_monotone(monotone_seconds);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"Krisztin periodic solution", criterion_1},
      {"neutral equation residual", criterion_2},
      {"monotonicity on linear3", [&] { return criterion_3(monotone, monotone_seconds); }},
      {"mass conservation", criterion_4},
      {"ordered-pair stability bound", [&] { return criterion_5(monotone); }},
      {"copy-of-the-base convergence", criterion_6},
      {"certifier soundness", criterion_7},
      {"operator inversion", criterion_8},
      {"cone-infimum properties", criterion_9},
      {"falsifiability canary", criterion_10},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    if (!o.passed) ++failures;
    std::printf("%s %zu %s: %s\n", o.passed ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
