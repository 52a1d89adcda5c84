#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nfde/compartment.hpp"
#include "nfde/csv.hpp"
#include "nfde/delay_measure.hpp"
#include "nfde/error.hpp"
#include "nfde/history.hpp"
#include "nfde/integrator.hpp"

// Model documents (schema 1). Compartments and driver harmonics are numbered from 1.
//
//   {
//     "schema": 1, "name": "...", "family": "infinite" | "finite", "m": 3,
//     "beta": [2, 2, 2],
//     "driver": {"frequencies": [1], "phase": [0], "harmonics": [{"wave": [1], "phase": 0}]},
//     "transport": [{"to": 2, "from": 1, "family": "linear", "coefficient": 0.6,
//                    "kappa": 0, "harmonic": 1, "amplitude": 0.5, "offset": 1,
//                    "pipe": <measure>          (infinite family)
//                    "rho": 1.0}],              (finite family, pipe = delta at -rho)
//     "neutral": [{"compartment": 1, "measure": <measure>}      (infinite family)
//                 {"compartment": 1, "gamma": 0.4, "alpha": 0.8}] (finite family)
//     "initial": {"kind": "constant" | "linear" | "sin" | "csv", ...},
//     "integrator": {"dt": 1e-3, "t_end": 50, "scheme": "heun" | "euler", "mode": "transformed" | "direct"}
//   }
//
// <measure> = {"atoms": [[s, w], ...], "density": {"step": h, "cells": [...]}}

namespace nfde {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

namespace detail {

inline std::string key_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline std::string key_path(const std::string& path, std::size_t index) {
  return path + "[" + std::to_string(index) + "]";
}

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw config_error(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw config_error(key_path(path, key), "missing required key");
  return *it;
}

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw config_error(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw config_error(path, "expected a finite number");
  return v;
}

inline int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw config_error(path, "expected an integer");
  return j.get<int>();
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw config_error(path, "expected a string");
  return j.get<std::string>();
}

inline double number_or(const json& j, const std::string& key, const std::string& path, double fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : as_number(*it, key_path(path, key));
}

inline std::vector<double> number_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw config_error(path, "expected an array of numbers");
  std::vector<double> v;
  for (std::size_t k = 0; k < j.size(); ++k) v.push_back(as_number(j[k], key_path(path, k)));
  return v;
}

// Scalar broadcast or per-component array.
inline Eigen::VectorXd component_values(const json& j, int m, const std::string& path) {
  if (j.is_number()) return Eigen::VectorXd::Constant(m, as_number(j, path));
  const auto v = number_list(j, path);
  if (static_cast<int>(v.size()) != m)
    throw config_error(path, "expected " + std::to_string(m) + " values, got " + std::to_string(v.size()));
  return Eigen::Map<const Eigen::VectorXd>(v.data(), m);
}

inline int compartment_index(const json& j, int m, const std::string& path) {
  const int i = as_int(j, path);
  if (i < 1 || i > m) throw config_error(path, "compartment must lie in 1.." + std::to_string(m));
  return i - 1;
}

// Invalid-argument errors from the domain constructors are re-raised against a key path.
template <class Fn>
auto at_key(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw config_error(path, e.what());
  }
}

} // namespace detail

inline DelayMeasure measure_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw config_error(path, "expected a measure object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "atoms" && it.key() != "density")
      throw config_error(detail::key_path(path, it.key()), "unknown key");
  std::vector<DelayMeasure::Atom> atoms;
  if (auto it = j.find("atoms"); it != j.end()) {
    const std::string ap = detail::key_path(path, "atoms");
    if (!it->is_array()) throw config_error(ap, "expected an array of [s, w] pairs");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const json& a = (*it)[k];
      const std::string p = detail::key_path(ap, k);
      if (!a.is_array() || a.size() != 2) throw config_error(p, "expected [s, w]");
      const double s = detail::as_number(a[0], p + "[0]");
      if (s > 0.0) throw config_error(p + "[0]", "atom location must be <= 0");
      atoms.push_back({s, detail::as_number(a[1], p + "[1]")});
    }
  }
  DelayMeasure::Density density;
  if (auto it = j.find("density"); it != j.end()) {
    const std::string dp = detail::key_path(path, "density");
    density.step = detail::as_number(detail::require(*it, "step", dp), detail::key_path(dp, "step"));
    if (!(density.step > 0.0)) throw config_error(detail::key_path(dp, "step"), "must be positive");
    density.cells = detail::number_list(detail::require(*it, "cells", dp), detail::key_path(dp, "cells"));
    if (auto h = it->find("horizon"); h != it->end()) {
      const double horizon = detail::as_number(*h, detail::key_path(dp, "horizon"));
      if (std::abs(horizon - density.horizon()) > 1e-9 * std::max(1.0, horizon))
        throw config_error(detail::key_path(dp, "horizon"), "does not equal step * len(cells)");
    }
  }
  return detail::at_key(path, [&] { return DelayMeasure(std::move(atoms), std::move(density)); });
}

inline json measure_to_json(const DelayMeasure& mu) {
  json j = json::object();
  json atoms = json::array();
  for (const auto& a : mu.atoms()) atoms.push_back({a.location, a.weight});
  j["atoms"] = atoms;
  if (!mu.density().cells.empty())
    j["density"] = {{"step", mu.density().step}, {"horizon", mu.density().horizon()}, {"cells", mu.density().cells}};
  return j;
}

namespace detail {

inline TransportFamily transport_family(const std::string& s, const std::string& path) {
  if (s == "linear") return TransportFamily::linear;
  if (s == "saturating_arctan" || s == "arctan") return TransportFamily::saturating_arctan;
  if (s == "logistic_slope" || s == "logistic") return TransportFamily::logistic_slope;
  throw config_error(path, "unknown transport family '" + s + "' (linear, saturating_arctan, logistic_slope)");
}

inline const char* transport_family_name(TransportFamily f) {
  switch (f) {
  case TransportFamily::linear: return "linear";
  case TransportFamily::saturating_arctan: return "saturating_arctan";
  case TransportFamily::logistic_slope: return "logistic_slope";
  }
  return "linear";
}

inline Driver driver_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw config_error(path, "expected an object");
  std::vector<double> freq, phase;
  if (auto it = j.find("frequencies"); it != j.end()) freq = number_list(*it, key_path(path, "frequencies"));
  if (auto it = j.find("phase"); it != j.end()) phase = number_list(*it, key_path(path, "phase"));
  std::vector<Harmonic> harmonics;
  if (auto it = j.find("harmonics"); it != j.end()) {
    const std::string hp = key_path(path, "harmonics");
    if (!it->is_array()) throw config_error(hp, "expected an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string p = key_path(hp, k);
      Harmonic h;
      const json& w = require((*it)[k], "wave", p);
      if (!w.is_array()) throw config_error(key_path(p, "wave"), "expected an array of integers");
      for (std::size_t q = 0; q < w.size(); ++q) h.wave.push_back(as_int(w[q], key_path(key_path(p, "wave"), q)));
      h.phase = number_or((*it)[k], "phase", p, 0.0);
      harmonics.push_back(std::move(h));
    }
  }
  return at_key(path, [&] { return Driver(freq, phase, harmonics); });
}

inline json driver_to_json(const Driver& d) {
  json h = json::array();
  for (const auto& x : d.harmonics()) h.push_back({{"wave", x.wave}, {"phase", x.phase}});
  return {{"frequencies", d.frequencies()}, {"phase", d.initial_phase()}, {"harmonics", h}};
}

} // namespace detail

/// Builds a model from a schema-1 document. Errors name the offending key.
inline CompartmentModel model_from_json(const json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw config_error("", "model document must be an object");
  const int schema = as_int(require(doc, "schema", ""), "schema");
  if (schema != schema_version)
    throw config_error("schema", "unsupported schema version " + std::to_string(schema));
  const std::string name = doc.contains("name") ? as_string(doc["name"], "name") : "unnamed";
  const std::string fam = as_string(require(doc, "family", ""), "family");
  ModelFamily family;
  if (fam == "infinite")
    family = ModelFamily::infinite_delay;
  else if (fam == "finite")
    family = ModelFamily::finite_delay;
  else
    throw config_error("family", "expected 'infinite' or 'finite', got '" + fam + "'");
  const int m = as_int(require(doc, "m", ""), "m");
  if (m < 1) throw config_error("m", "need at least one compartment");
  const Eigen::VectorXd beta = component_values(require(doc, "beta", ""), m, "beta");
  for (int i = 0; i < m; ++i)
    if (!(beta[i] > 0.0)) throw config_error(key_path("beta", static_cast<std::size_t>(i)), "must be positive");

  Driver driver;
  if (auto it = doc.find("driver"); it != doc.end()) driver = driver_from_json(*it, "driver");

  std::vector<Flow> flows;
  if (auto it = doc.find("transport"); it != doc.end()) {
    if (!it->is_array()) throw config_error("transport", "expected an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const json& e = (*it)[k];
      const std::string p = key_path("transport", k);
      Flow f;
      f.to = compartment_index(require(e, "to", p), m, key_path(p, "to"));
      f.from = compartment_index(require(e, "from", p), m, key_path(p, "from"));
      f.g.family = transport_family(e.contains("family") ? as_string(e["family"], key_path(p, "family")) : "linear",
                                    key_path(p, "family"));
      f.g.coefficient = as_number(require(e, "coefficient", p), key_path(p, "coefficient"));
      f.g.kappa = number_or(e, "kappa", p, 0.0);
      if (e.contains("harmonic")) {
        const int h = as_int(e["harmonic"], key_path(p, "harmonic"));
        if (h < 1 || h > static_cast<int>(driver.harmonics().size()))
          throw config_error(key_path(p, "harmonic"), "no such driver harmonic");
        f.g.harmonic = h - 1;
      }
      f.g.amplitude = number_or(e, "amplitude", p, 0.0);
      f.g.offset = number_or(e, "offset", p, 1.0);
      at_key(p, [&] {
        f.g.validate();
        return 0;
      });
      if (family == ModelFamily::finite_delay) {
        const double rho = as_number(require(e, "rho", p), key_path(p, "rho"));
        if (rho < 0.0) throw config_error(key_path(p, "rho"), "must be >= 0");
        f.pipe = DelayMeasure::dirac(-rho);
      } else {
        f.pipe = measure_from_json(require(e, "pipe", p), key_path(p, "pipe"));
      }
      flows.push_back(std::move(f));
    }
  }

  std::vector<DelayMeasure> neutral(static_cast<std::size_t>(m));
  if (auto it = doc.find("neutral"); it != doc.end()) {
    if (!it->is_array()) throw config_error("neutral", "expected an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const json& e = (*it)[k];
      const std::string p = key_path("neutral", k);
      const int i = compartment_index(require(e, "compartment", p), m, key_path(p, "compartment"));
      DelayMeasure nu;
      if (family == ModelFamily::finite_delay) {
        const double gamma = as_number(require(e, "gamma", p), key_path(p, "gamma"));
        const double alpha = as_number(require(e, "alpha", p), key_path(p, "alpha"));
        if (!(alpha > 0.0)) throw config_error(key_path(p, "alpha"), "must be positive");
        nu = DelayMeasure::dirac(-alpha, gamma);
      } else {
        nu = measure_from_json(require(e, "measure", p), key_path(p, "measure"));
      }
      if (nu.has_atom_at_zero()) throw config_error(p, "neutral measure has an atom at 0");
      neutral[static_cast<std::size_t>(i)] = std::move(nu);
    }
  }
  return at_key("", [&] { return CompartmentModel(name, family, m, flows, neutral, beta, driver); });
}

/// Canonical document for a model (no initial/integrator sections).
inline json model_to_json(const CompartmentModel& model) {
  const bool finite = model.family() == ModelFamily::finite_delay;
  json doc = {{"schema", schema_version},
              {"name", model.name()},
              {"family", finite ? "finite" : "infinite"},
              {"m", model.dim()},
              {"beta", std::vector<double>(model.beta().data(), model.beta().data() + model.dim())},
              {"driver", detail::driver_to_json(model.driver())}};
  json transport = json::array();
  for (const auto& f : model.flows()) {
    json e = {{"to", f.to + 1},
              {"from", f.from + 1},
              {"family", detail::transport_family_name(f.g.family)},
              {"coefficient", f.g.coefficient},
              {"kappa", f.g.kappa},
              {"amplitude", f.g.amplitude},
              {"offset", f.g.offset}};
    if (f.g.harmonic >= 0) e["harmonic"] = f.g.harmonic + 1;
    if (finite)
      e["rho"] = model.rho(f.to, f.from);
    else
      e["pipe"] = measure_to_json(f.pipe);
    transport.push_back(e);
  }
  doc["transport"] = transport;
  json neutral = json::array();
  for (int i = 0; i < model.dim(); ++i) {
    if (model.neutral()[static_cast<std::size_t>(i)].is_zero()) continue;
    if (finite)
      neutral.push_back({{"compartment", i + 1}, {"gamma", model.gamma(i)}, {"alpha", model.alpha(i)}});
    else
      neutral.push_back({{"compartment", i + 1}, {"measure", measure_to_json(model.neutral()[static_cast<std::size_t>(i)])}});
  }
  doc["neutral"] = neutral;
  return doc;
}

/// FNV-1a 64 of the canonical model document, as 16 hex digits.
inline std::string model_hash(const CompartmentModel& model) {
  const std::string text = model_to_json(model).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

/// Initial history on [-horizon, 0] from an "initial" section:
///   constant: value
///   linear:   intercept + slope * s
///   sin:      offset + amplitude * sin(frequency * s + phase)
///   csv:      path to a file with header s,x_1..x_m (resampled onto the grid)
/// Each numeric field is a scalar or one value per compartment.
inline History initial_history(const json& spec, int m, double step, double horizon,
                               const std::string& path = "initial") {
  using namespace detail;
  const std::string kind = as_string(require(spec, "kind", path), key_path(path, "kind"));
  auto field = [&](const char* key, double fallback) -> Eigen::VectorXd {
    auto it = spec.find(key);
    return it == spec.end() ? Eigen::VectorXd::Constant(m, fallback) : component_values(*it, m, key_path(path, key));
  };
  if (kind == "constant") return History::constant(field("value", 0.0), step, horizon);
  if (kind == "linear") return History::linear(field("intercept", 0.0), field("slope", 0.0), step, horizon);
  if (kind == "sin") {
    const Eigen::VectorXd off = field("offset", 0.0), amp = field("amplitude", 1.0), fr = field("frequency", 1.0),
                          ph = field("phase", 0.0);
    return History::sample(m, step, horizon, [&](double s) -> Eigen::VectorXd {
      return off.array() + amp.array() * (fr.array() * s + ph.array()).sin();
    });
  }
  if (kind == "csv") {
    const std::string file = as_string(require(spec, "path", path), key_path(path, "path"));
    History h = at_key(key_path(path, "path"), [&] { return read_history_csv(file); });
    if (h.dim() != m) throw config_error(key_path(path, "path"), "column count does not match m");
    return History::sample(m, step, horizon, [&](double s) { return h.eval(s); });
  }
  throw config_error(key_path(path, "kind"), "unknown initial kind '" + kind + "' (constant, linear, sin, csv)");
}

/// Integrator settings from an optional "integrator" section.
inline IntegratorConfig integrator_from_json(const json& doc) {
  using namespace detail;
  IntegratorConfig cfg;
  auto it = doc.find("integrator");
  if (it == doc.end()) return cfg;
  const std::string p = "integrator";
  cfg.dt = number_or(*it, "dt", p, cfg.dt);
  if (!(cfg.dt > 0.0)) throw config_error("integrator.dt", "must be positive");
  cfg.t_end = number_or(*it, "t_end", p, cfg.t_end);
  if (!(cfg.t_end >= 0.0)) throw config_error("integrator.t_end", "must be >= 0");
  if (auto s = it->find("scheme"); s != it->end()) {
    const std::string v = as_string(*s, "integrator.scheme");
    if (v == "heun")
      cfg.scheme = Scheme::heun;
    else if (v == "euler")
      cfg.scheme = Scheme::euler;
    else
      throw config_error("integrator.scheme", "expected 'heun' or 'euler'");
  }
  if (auto s = it->find("mode"); s != it->end()) {
    const std::string v = as_string(*s, "integrator.mode");
    if (v == "transformed")
      cfg.mode = NeutralMode::transformed;
    else if (v == "direct")
      cfg.mode = NeutralMode::direct;
    else
      throw config_error("integrator.mode", "expected 'transformed' or 'direct'");
  }
  return cfg;
}

inline json parse_document(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error("", origin + ": " + e.what());
  }
}

inline json load_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("", "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_document(ss.str(), path);
}

} // namespace nfde
