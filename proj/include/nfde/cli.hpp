#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "nfde/certify.hpp"
#include "nfde/config.hpp"
#include "nfde/csv.hpp"
#include "nfde/error.hpp"
#include "nfde/integrator.hpp"
#include "nfde/labsuite.hpp"
#include "nfde/presets.hpp"

namespace nfde {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_integration = 2, exit_unsat = 3, exit_experiment = 4 };

/// Everything needed to reproduce a run; echoed into every output document.
struct RunManifest {
  std::string command;              // simulate | certify | experiment
  std::string kind;                 // experiment kind
  std::string config_path;
  std::string preset;
  std::string out_dir = ".";
  unsigned long long seed = 1;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<int> pairs;
  std::map<std::string, double> tolerances;
  long stride = 1;
};

inline json manifest_to_json(const RunManifest& m) {
  json j = {{"command", m.command}, {"out", m.out_dir}, {"seed", m.seed}};
  if (!m.kind.empty()) j["kind"] = m.kind;
  if (!m.config_path.empty()) j["config"] = m.config_path;
  if (!m.preset.empty()) j["preset"] = m.preset;
  json o = json::object();
  if (m.dt) o["dt"] = *m.dt;
  if (m.t_end) o["t_end"] = *m.t_end;
  if (m.pairs) o["pairs"] = *m.pairs;
  for (const auto& [k, v] : m.tolerances) o["tol." + k] = v;
  j["overrides"] = o;
  return j;
}

/// Shell command that repeats the run (output directory omitted).
inline std::string replay_command(const RunManifest& m) {
  std::string s = "nfde " + m.command;
  if (!m.kind.empty()) s += " " + m.kind;
  if (!m.preset.empty()) s += " --preset " + m.preset;
  if (!m.config_path.empty()) s += " --config " + m.config_path;
  s += " --seed " + std::to_string(m.seed);
  if (m.dt) s += " --dt " + format_double(*m.dt);
  if (m.t_end) s += " --t-end " + format_double(*m.t_end);
  if (m.pairs) s += " --pairs " + std::to_string(*m.pairs);
  for (const auto& [k, v] : m.tolerances) s += " --tol " + k + "=" + format_double(v);
  return s;
}

namespace detail {

inline json load_manifest_document(const RunManifest& m) {
  if (!m.preset.empty() && !m.config_path.empty()) throw config_error("preset", "give either --preset or --config");
  if (!m.preset.empty()) return preset_document(m.preset);
  if (m.config_path.empty()) throw config_error("config", "no model given (use --config or --preset)");
  return load_document(m.config_path);
}

inline IntegratorConfig manifest_integrator(const RunManifest& m, const json& doc) {
  IntegratorConfig cfg = integrator_from_json(doc);
  if (m.dt) {
    if (!(*m.dt > 0.0)) throw config_error("dt", "must be positive");
    cfg.dt = *m.dt;
  }
  if (m.t_end) {
    if (!(*m.t_end >= 0.0)) throw config_error("t_end", "must be >= 0");
    cfg.t_end = *m.t_end;
  }
  return cfg;
}

inline json initial_spec(const json& doc) {
  auto it = doc.find("initial");
  return it == doc.end() ? json{{"kind", "constant"}, {"value", 1.0}} : *it;
}

inline std::filesystem::path prepare_out(const RunManifest& m) {
  std::filesystem::path dir(m.out_dir.empty() ? "." : m.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline json hypothesis_to_json(const HypothesisResult& h) {
  json j = {{"name", h.name}, {"sat", h.sat}, {"margin", json_number(h.margin)}, {"note", h.note}};
  j["component"] = h.component < 0 ? json(nullptr) : json(h.component + 1);
  j["witness_beta"] = h.witness_beta ? json_number(*h.witness_beta) : json(nullptr);
  return j;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& body) {
  try {
    return body();
  } catch (const config_error& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const stability_error& e) {
    err << "stability error: " << e.what() << '\n';
    return exit_integration;
  } catch (const convergence_error& e) {
    err << "integration error: " << e.what() << '\n';
    return exit_integration;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_integration;
  }
}

} // namespace detail

inline json cert_to_json(const CertReport& r) {
  json items = json::array(), configured = json::array();
  for (const auto& h : r.items) items.push_back(detail::hypothesis_to_json(h));
  for (const auto& h : r.configured_beta) configured.push_back(detail::hypothesis_to_json(h));
  return {{"family", r.family},         {"all_sat", r.all_sat()}, {"hypotheses", items},
          {"configured_beta", configured}, {"gamma", r.gamma},   {"k0", r.k0},
          {"khat0", json_number(r.khat0)}};
}

/// Integrates the model and writes trajectory.csv plus trajectory.meta.json.
inline int cmd_simulate(const RunManifest& m, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const json doc = detail::load_manifest_document(m);
    const CompartmentModel model = model_from_json(doc);
    const IntegratorConfig cfg = detail::manifest_integrator(m, doc);
    const History x0 =
        initial_history(detail::initial_spec(doc), model.dim(), cfg.dt, std::max(model.horizon(), cfg.dt));
    const auto dir = detail::prepare_out(m);
    const IntegrationResult res = integrate(model, x0, cfg);
    {
      std::ofstream csv(dir / "trajectory.csv");
      if (!csv) throw std::runtime_error("cannot write trajectory.csv");
      write_trajectory_csv(csv, res.trajectory, m.stride);
    }
    json meta = {{"manifest", manifest_to_json(m)},
                 {"model", model_to_json(model)},
                 {"model_hash", model_hash(model)},
                 {"initial", detail::initial_spec(doc)},
                 {"dt", cfg.dt},
                 {"t_end", cfg.t_end},
                 {"scheme", cfg.scheme == Scheme::heun ? "heun" : "euler"},
                 {"mode", cfg.mode == NeutralMode::direct ? "direct" : "transformed"},
                 {"stride", m.stride},
                 {"stats",
                  {{"steps", res.stats.steps},
                   {"picard_solves", res.stats.picard_solves},
                   {"max_picard_iterations", res.stats.max_picard_iterations},
                   {"max_picard_residual", res.stats.max_picard_residual}}},
                 {"replay", replay_command(m)}};
    detail::write_json(dir / "trajectory.meta.json", meta);
    out << "simulated " << model.name() << ": " << res.stats.steps << " steps, t_end " << format_double(cfg.t_end)
        << " -> " << (dir / "trajectory.csv").string() << '\n';
    return static_cast<int>(exit_ok);
  });
}

/// Runs the hypothesis certifier and writes certificate.json; exit 3 when something is UNSAT.
inline int cmd_certify(const RunManifest& m, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const json doc = detail::load_manifest_document(m);
    const CompartmentModel model = model_from_json(doc);
    const auto dir = detail::prepare_out(m);
    const CertReport rep = certify(model);
    json j = cert_to_json(rep);
    j["manifest"] = manifest_to_json(m);
    j["model"] = model.name();
    j["model_hash"] = model_hash(model);
    j["replay"] = replay_command(m);
    detail::write_json(dir / "certificate.json", j);
    for (const auto& h : rep.items) {
      out << (h.sat ? "SAT   " : "UNSAT ") << h.name;
      if (h.component >= 0) out << "[" << h.component + 1 << "]";
      if (h.witness_beta) out << " beta=" << format_double(*h.witness_beta);
      out << " margin=" << format_double(h.margin) << '\n';
    }
    return static_cast<int>(rep.all_sat() ? exit_ok : exit_unsat);
  });
}

/// Builds the experiment spec from a manifest (document defaults, then overrides).
inline ExperimentSpec experiment_spec(const RunManifest& m) {
  const auto kind = parse_kind(m.kind);
  if (!kind) throw config_error("kind", "unknown experiment '" + m.kind + "' (monotone, mass, converge, cover, superq)");
  const json doc = detail::load_manifest_document(m);
  ExperimentSpec spec;
  spec.model = model_from_json(doc);
  spec.kind = *kind;
  spec.initial = detail::initial_spec(doc);
  const IntegratorConfig cfg = detail::manifest_integrator(m, doc);
  spec.dt = cfg.dt;
  spec.t_end = cfg.t_end;
  spec.seed = m.seed;
  if (m.pairs) {
    if (*m.pairs < 1) throw config_error("pairs", "must be >= 1");
    spec.pairs = *m.pairs;
  }
  for (const auto& [k, v] : m.tolerances) {
    double* slot = k == "cone"        ? &spec.tol.cone
                   : k == "mass"      ? &spec.tol.mass
                   : k == "conv"      ? &spec.tol.conv
                   : k == "cover"     ? &spec.tol.cover
                   : k == "superq"    ? &spec.tol.superq
                   : k == "bound"     ? &spec.tol.bound
                   : k == "amplitude" ? &spec.tol.amplitude
                                      : nullptr;
    if (!slot) throw config_error("tol." + k, "unknown tolerance");
    if (!(v >= 0.0)) throw config_error("tol." + k, "must be >= 0");
    *slot = v;
  }
  spec.replay = replay_command(m);
  return spec;
}

/// Runs one labsuite experiment and writes <kind>.report.json; exit 4 on failure.
inline int cmd_experiment(const RunManifest& m, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const ExperimentSpec spec = experiment_spec(m);
    const auto dir = detail::prepare_out(m);
    const ExperimentReport rep = run_experiment(spec);
    json j = to_json(rep);
    j["manifest"] = manifest_to_json(m);
    detail::write_json(dir / (m.kind + ".report.json"), j);
    for (const auto& a : rep.assertions)
      out << (a.passed ? "PASS " : "FAIL ") << a.name << " (value " << format_double(a.value) << ", threshold "
          << format_double(a.threshold) << ")\n";
    return static_cast<int>(rep.passed() ? exit_ok : exit_experiment);
  });
}

} // namespace nfde
