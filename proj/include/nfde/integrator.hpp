#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "nfde/compartment.hpp"
#include "nfde/error.hpp"
#include "nfde/history.hpp"
#include "nfde/neutral_op.hpp"

namespace nfde {

enum class Scheme { heun, euler };

/// transformed: step y = D z_t, y' = F(t, D^-1 y_t), recovering z by a Picard closure.
/// direct: method of steps for single-atom neutral parts, recomputing D z_t from stored
/// values each step.
enum class NeutralMode { transformed, direct };

struct IntegratorConfig {
  double dt = 1e-2;
  Scheme scheme = Scheme::heun;
  NeutralMode mode = NeutralMode::transformed;
  double picard_tol = 1e-12;
  int picard_max = 50;
  double t_end = 10.0;
  /// Driver time at trajectory time 0.
  double start_time = 0.0;
};

struct IntegrationStats {
  long steps = 0;
  long picard_solves = 0;
  int max_picard_iterations = 0;
  double max_picard_residual = 0.0;
};

struct IntegrationResult {
  Trajectory trajectory;
  IntegrationStats stats;
  double horizon = 0.0;  // section length that covers every measure
};

namespace detail {

// z_{n+1} = y + int [d nu] z(t_{n+1} + theta), closed by Picard iteration when some neutral
// node lies within one step of the present.
inline void close_neutral(const NeutralOperator& D, Trajectory& tr, long n, const Eigen::VectorXd& y,
                          const IntegratorConfig& cfg, bool implicit, IntegrationStats& stats) {
  const int m = tr.dim();
  const auto view = tr.view(n);
  int it = 0;
  double change = 0.0;
  do {
    change = 0.0;
    Eigen::VectorXd next(m);
    for (int i = 0; i < m; ++i) next[i] = y[i] + D.subtracted(view, 0.0, i);
    for (int i = 0; i < m; ++i) {
      change = std::max(change, std::abs(next[i] - tr.value(n, i)) / std::max(1.0, std::abs(next[i])));
      tr.value(n, i) = next[i];
    }
    ++it;
    if (!implicit) break;
    if (it >= cfg.picard_max && change > cfg.picard_tol)
      throw convergence_error("integrate: Picard closure did not converge at step " + std::to_string(n),
                              change, n);
  } while (change > cfg.picard_tol);
  ++stats.picard_solves;
  stats.max_picard_iterations = std::max(stats.max_picard_iterations, it);
  if (implicit) stats.max_picard_residual = std::max(stats.max_picard_residual, change);
}

} // namespace detail

/// Solves d/dt D z_t = F(omega . t, z_t) from the initial history x0 on [0, t_end].
/// The grid step of x0 must equal cfg.dt.
inline IntegrationResult integrate(const CompartmentModel& model, const History& x0, const IntegratorConfig& cfg) {
  if (x0.dim() != model.dim()) throw std::invalid_argument("integrate: initial history has wrong dimension");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  if (std::abs(x0.step() - cfg.dt) > 1e-12 * cfg.dt)
    throw std::invalid_argument("integrate: initial history grid step differs from dt");
  const NeutralOperator& D = model.neutral_operator();
  const double gamma = D.contraction_bound();
  if (!(gamma < 1.0))
    throw stability_error(gamma, "integrate: neutral operator fails the contraction bound (gamma = " +
                                     std::to_string(gamma) + ")");
  const double h = cfg.dt;
  const bool implicit = D.min_lag() < h * (1.0 - detail::node_snap);
  if (cfg.mode == NeutralMode::direct) {
    if (model.family() != ModelFamily::finite_delay)
      throw std::invalid_argument("integrate: direct mode needs a finite-delay model");
    if (implicit) throw std::invalid_argument("integrate: direct mode needs neutral delays >= dt");
  }

  IntegrationResult res;
  res.horizon = std::max(model.horizon(), h);
  res.trajectory = Trajectory(x0, cfg.start_time);
  Trajectory& tr = res.trajectory;
  const long steps = detail::grid_count(cfg.t_end, h);
  tr.reserve(steps);
  const int m = model.dim();

  auto time = [&](long n) { return cfg.start_time + static_cast<double>(n) * h; };
  Eigen::VectorXd y = apply_D(D, tr.view(0));
  for (long n = 0; n < steps; ++n) {
    if (cfg.mode == NeutralMode::direct) y = apply_D(D, tr.view(n));
    const Eigen::VectorXd f0 = eval_F(model, time(n), tr.view(n));
    tr.append(tr.node(n));
    if (cfg.scheme == Scheme::euler) {
      y += h * f0;
      detail::close_neutral(D, tr, n + 1, y, cfg, implicit, res.stats);
    } else {
      const Eigen::VectorXd predicted = y + h * f0;
      detail::close_neutral(D, tr, n + 1, predicted, cfg, implicit, res.stats);
      const Eigen::VectorXd f1 = eval_F(model, time(n + 1), tr.view(n + 1));
      y += 0.5 * h * (f0 + f1);
      detail::close_neutral(D, tr, n + 1, y, cfg, implicit, res.stats);
    }
    for (int i = 0; i < m; ++i)
      if (!std::isfinite(tr.value(n + 1, i)))
        throw convergence_error("integrate: non-finite state at step " + std::to_string(n + 1), INFINITY, n + 1);
    ++res.stats.steps;
  }
  return res;
}

/// Section u(t) of an integration result, on the horizon covering every measure.
inline History section(const IntegrationResult& r, double t) { return r.trajectory.section(t, r.horizon); }

} // namespace nfde
