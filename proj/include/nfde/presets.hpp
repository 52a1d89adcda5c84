#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nfde/config.hpp"
#include "nfde/error.hpp"

namespace nfde {

namespace presets {

// d/dt [x(t) - c x(t - pi/4)] = -x(t) + x(t - 7 pi/4), c = sqrt(2) - 1; x(t) = sin t solves it.
inline constexpr std::string_view krisztin = R"({
  "schema": 1, "name": "krisztin", "family": "finite", "m": 1, "beta": [1.0],
  "transport": [{"to": 1, "from": 1, "family": "linear", "coefficient": 1.0, "rho": 5.497787143782138}],
  "neutral": [{"compartment": 1, "gamma": 0.41421356237309515, "alpha": 0.7853981633974483}],
  "initial": {"kind": "sin"},
  "integrator": {"dt": 0.001, "t_end": 50}
})";

inline constexpr std::string_view linear3 = R"({
  "schema": 1, "name": "linear3", "family": "infinite", "m": 3, "beta": [2.0, 2.0, 2.0],
  "transport": [
    {"to": 2, "from": 1, "coefficient": 0.6, "pipe": {"atoms": [[-1.0, 1.0]]}},
    {"to": 3, "from": 2, "coefficient": 0.5,
     "pipe": {"density": {"step": 0.25, "cells": [0, 0, 0.25, 0.25, 0.25, 0.25]}}},
    {"to": 1, "from": 3, "coefficient": 0.4, "pipe": {"atoms": [[-0.5, 0.5], [-2.0, 0.5]]}},
    {"to": 3, "from": 1, "coefficient": 0.3,
     "pipe": {"density": {"step": 0.25, "cells": [0.25, 0.25, 0.25, 0.25]}}},
    {"to": 1, "from": 2, "coefficient": 0.2, "pipe": {"atoms": [[-0.75, 1.0]]}}
  ],
  "neutral": [
    {"compartment": 1, "measure": {"atoms": [[-0.5, 0.1]]}},
    {"compartment": 2, "measure": {"density": {"step": 0.25, "cells": [0, 0, 0.05, 0.05]}}},
    {"compartment": 3, "measure": {"atoms": [[-0.25, 0.05], [-1.0, 0.05]]}}
  ],
  "initial": {"kind": "sin", "offset": [1.0, 2.0, 0.5], "amplitude": [0.3, 0.5, 0.2], "phase": [0.0, 1.0, 2.0]},
  "integrator": {"dt": 0.001, "t_end": 100}
})";

inline constexpr std::string_view neutral_ring = R"({
  "schema": 1, "name": "neutral-ring", "family": "infinite", "m": 3, "beta": [2.0, 2.0, 2.0],
  "driver": {"frequencies": [1.0], "phase": [0.0], "harmonics": [{"wave": [1], "phase": 0.0}]},
  "transport": [
    {"to": 2, "from": 1, "family": "linear", "coefficient": 0.5, "harmonic": 1, "amplitude": 0.5,
     "pipe": {"atoms": [[-0.5, 1.0]]}},
    {"to": 3, "from": 2, "family": "saturating_arctan", "coefficient": 0.6, "harmonic": 1, "amplitude": -0.3,
     "pipe": {"density": {"step": 0.25, "cells": [0.25, 0.25, 0.25, 0.25]}}},
    {"to": 1, "from": 3, "family": "logistic_slope", "coefficient": 0.3, "kappa": 0.5,
     "pipe": {"atoms": [[-1.0, 0.5], [-1.5, 0.5]]}},
    {"to": 2, "from": 3, "family": "linear", "coefficient": 0.2, "pipe": {"atoms": [[-0.25, 1.0]]}}
  ],
  "neutral": [
    {"compartment": 1, "measure": {"atoms": [[-0.4, 0.15]]}},
    {"compartment": 2, "measure": {"atoms": [[-0.6, 0.1]]}},
    {"compartment": 3, "measure": {"density": {"step": 0.25, "cells": [0, 0.05, 0.05]}}}
  ],
  "initial": {"kind": "sin", "offset": [1.0, 1.5, 0.8], "amplitude": 0.3, "frequency": 2.0},
  "integrator": {"dt": 0.0025, "t_end": 500}
})";

// Same ring driven by two incommensurate frequencies (quasi-periodic forcing).
inline constexpr std::string_view neutral_torus = R"({
  "schema": 1, "name": "neutral-torus", "family": "infinite", "m": 3, "beta": [2.0, 2.0, 2.0],
  "driver": {"frequencies": [1.0, 1.4142135623730951], "phase": [0.0, 0.0],
             "harmonics": [{"wave": [1, 0], "phase": 0.0}, {"wave": [0, 1], "phase": 0.0}]},
  "transport": [
    {"to": 2, "from": 1, "family": "linear", "coefficient": 0.5, "harmonic": 1, "amplitude": 0.5,
     "pipe": {"atoms": [[-0.5, 1.0]]}},
    {"to": 3, "from": 2, "family": "saturating_arctan", "coefficient": 0.6, "harmonic": 2, "amplitude": -0.3,
     "pipe": {"density": {"step": 0.25, "cells": [0.25, 0.25, 0.25, 0.25]}}},
    {"to": 1, "from": 3, "family": "logistic_slope", "coefficient": 0.3, "kappa": 0.5,
     "pipe": {"atoms": [[-1.0, 0.5], [-1.5, 0.5]]}},
    {"to": 2, "from": 3, "family": "linear", "coefficient": 0.2, "pipe": {"atoms": [[-0.25, 1.0]]}}
  ],
  "neutral": [
    {"compartment": 1, "measure": {"atoms": [[-0.4, 0.15]]}},
    {"compartment": 2, "measure": {"atoms": [[-0.6, 0.1]]}},
    {"compartment": 3, "measure": {"density": {"step": 0.25, "cells": [0, 0.05, 0.05]}}}
  ],
  "initial": {"kind": "sin", "offset": [1.0, 1.5, 0.8], "amplitude": 0.3, "frequency": 2.0},
  "integrator": {"dt": 0.01, "t_end": 500}
})";

// Neutral parts too heavy for any beta: (H5) fails in compartment 1.
inline constexpr std::string_view canary = R"({
  "schema": 1, "name": "canary", "family": "infinite", "m": 2, "beta": [1.0, 1.0],
  "transport": [
    {"to": 2, "from": 1, "coefficient": 1.0, "pipe": {"atoms": [[-1.0, 1.0]]}},
    {"to": 1, "from": 2, "coefficient": 1.0, "pipe": {"atoms": [[-1.0, 1.0]]}}
  ],
  "neutral": [
    {"compartment": 1, "measure": {"atoms": [[-1.0, 0.5]]}},
    {"compartment": 2, "measure": {"atoms": [[-1.0, 0.3]]}}
  ],
  "initial": {"kind": "sin", "offset": [1.0, 1.0], "amplitude": 0.2},
  "integrator": {"dt": 0.01, "t_end": 20}
})";

// Plain ODE: z_1' = -z_1, z_2' = z_1, so z_1(t) = e^{-t} from (1, 0).
inline constexpr std::string_view decay = R"({
  "schema": 1, "name": "decay", "family": "infinite", "m": 2, "beta": [2.0, 1.0],
  "transport": [{"to": 2, "from": 1, "coefficient": 1.0, "pipe": {"atoms": [[0.0, 1.0]]}}],
  "initial": {"kind": "constant", "value": [1.0, 0.0]},
  "integrator": {"dt": 0.001, "t_end": 5}
})";

// Neutral masses sum past 1: (H4) fails.
inline constexpr std::string_view heavy_neutral = R"({
  "schema": 1, "name": "heavy-neutral", "family": "infinite", "m": 2, "beta": [1.0, 1.0],
  "transport": [
    {"to": 2, "from": 1, "coefficient": 0.5, "pipe": {"atoms": [[-1.0, 1.0]]}},
    {"to": 1, "from": 2, "coefficient": 0.5, "pipe": {"atoms": [[-1.0, 1.0]]}}
  ],
  "neutral": [
    {"compartment": 1, "measure": {"atoms": [[-1.0, 0.6]]}},
    {"compartment": 2, "measure": {"atoms": [[-1.0, 0.5]]}}
  ],
  "initial": {"kind": "constant", "value": 1.0},
  "integrator": {"dt": 0.01, "t_end": 10}
})";

// Scalar loop x' = -x + x(t-1), every constant is an equilibrium.
inline constexpr std::string_view loop1 = R"({
  "schema": 1, "name": "loop1", "family": "infinite", "m": 1, "beta": [2.0],
  "transport": [{"to": 1, "from": 1, "coefficient": 1.0, "pipe": {"atoms": [[-1.0, 1.0]]}}],
  "initial": {"kind": "constant", "value": 1.0},
  "integrator": {"dt": 0.001, "t_end": 100}
})";

struct Entry {
  std::string_view name;
  std::string_view text;
};

inline constexpr Entry all[] = {
    {"krisztin", krisztin}, {"linear3", linear3},   {"neutral-ring", neutral_ring},   {"neutral-torus", neutral_torus},
    {"canary", canary},     {"decay", decay},       {"heavy-neutral", heavy_neutral}, {"loop1", loop1},
};

} // namespace presets

inline std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& e : presets::all) out.emplace_back(e.name);
  return out;
}

/// Full document (model plus initial/integrator sections) of a built-in preset.
inline json preset_document(std::string_view name) {
  for (const auto& e : presets::all)
    if (e.name == name) return parse_document(std::string(e.text), "preset " + std::string(name));
  std::string known;
  for (const auto& e : presets::all) known += (known.empty() ? "" : ", ") + std::string(e.name);
  throw config_error("preset", "unknown preset '" + std::string(name) + "' (" + known + ")");
}

inline CompartmentModel preset_model(std::string_view name) { return model_from_json(preset_document(name)); }

} // namespace nfde
