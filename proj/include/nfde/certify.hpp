#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfde/compartment.hpp"
#include "nfde/expo_order.hpp"
#include "nfde/history.hpp"

namespace nfde {

struct HypothesisResult {
  std::string name;
  int component = -1;  // -1: model-wide
  bool sat = false;
  std::optional<double> witness_beta;
  double margin = 0.0;
  std::string note;
};

/// Ordered pair that produced the worst quasimonotonicity margin.
struct F4Witness {
  int sample = -1;
  int component = -1;
  std::string kind;
  double time = 0.0;
  History x;
  History y;
};

struct CertReport {
  std::string family;
  std::vector<HypothesisResult> items;
  /// Same inequalities evaluated at the model's own beta (the cone used by experiments).
  std::vector<HypothesisResult> configured_beta;
  double gamma = 0.0;
  double k0 = 1.0;
  double khat0 = 0.0;
  std::optional<F4Witness> witness;

  bool all_sat() const {
    for (const auto& it : items)
      if (!it.sat) return false;
    return true;
  }

  const HypothesisResult* find(const std::string& name, int component = -1) const {
    for (const auto& it : items)
      if (it.name == name && it.component == component) return &it;
    return nullptr;
  }
};

struct ScanResult {
  double beta = 0.0;
  double value = -std::numeric_limits<double>::infinity();
};

/// Maximizes phi over a log-spaced grid on [lo, hi] and refines the best bracket by golden
/// section. Non-finite values count as -inf.
inline ScanResult scan_maximum(const std::function<double(double)>& phi, double lo, double hi,
                               int points = 2001) {
  auto eval = [&](double b) {
    const double v = phi(b);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };
  ScanResult best;
  const double llo = std::log(lo), lhi = std::log(hi);
  int best_k = 0;
  std::vector<double> grid(points);
  for (int k = 0; k < points; ++k) {
    grid[k] = k + 1 == points ? hi : std::exp(llo + (lhi - llo) * k / (points - 1));
    const double v = eval(grid[k]);
    if (v > best.value) {
      best = {grid[k], v};
      best_k = k;
    }
  }
  double a = grid[std::max(0, best_k - 1)], b = grid[std::min(points - 1, best_k + 1)];
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = eval(c), fd = eval(d);
  for (int it = 0; it < 200 && (b - a) > 1e-14 * b; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = eval(d);
    }
  }
  const double mid = 0.5 * (a + b);
  const double fm = eval(mid);
  if (fm > best.value) best = {mid, fm};
  return best;
}

inline constexpr double beta_scan_lo = 1e-3;
inline constexpr double beta_scan_hi = 1e3;

namespace detail {

inline HypothesisResult transport_item(const CompartmentModel& model, const std::string& name) {
  HypothesisResult r{name, -1, true, std::nullopt, 0.0, ""};
  double worst = INFINITY;
  for (const auto& f : model.flows()) {
    worst = std::min(worst, f.g.p_min());
    if (!(f.g.coefficient >= 0.0) || !(f.g.p_min() > 0.0)) r.sat = false;
  }
  r.margin = model.flows().empty() ? 0.0 : worst;
  r.note = "built-in transport families satisfy g(t,0)=0 and dg/dv>=0 when coefficient>=0 and p_min>0";
  return r;
}

// beta_i (1 - int e^{-beta s} d nu_i) > L+_i
inline HypothesisResult neutral_size_item(const std::string& name, int i, const DelayMeasure& nu,
                                          double l_plus) {
  HypothesisResult r{name, i, false, std::nullopt, 0.0, ""};
  if (nu.is_zero()) {
    r.witness_beta = l_plus + 1.0;
    r.margin = 1.0;
    r.sat = true;
    r.note = "no neutral term; beta = L+ + 1";
    return r;
  }
  auto phi = [&](double b) { return b * (1.0 - nu.exp_moment(b)); };
  const ScanResult s = scan_maximum(phi, beta_scan_lo, beta_scan_hi);
  r.witness_beta = s.beta;
  r.margin = phi(s.beta) - l_plus;
  r.sat = r.margin > 0.0;
  r.note = r.sat ? "witness found" : "no witness found; scanned maximum " + std::to_string(s.value);
  return r;
}

inline double khat0(const CompartmentModel& model, double k0) {
  const double gamma = model.neutral_operator().contraction_bound();
  const double a_norm = model.beta().cwiseAbs().maxCoeff();
  const double f_sup = model.lipschitz_bound() * (1.0 + gamma) * k0;
  return f_sup / ((1.0 - gamma) * a_norm) + k0;
}

} // namespace detail

/// Hypotheses of the infinite-delay family: transport structure, neutral/pipe measures, and
/// existence of beta_i with beta_i (1 - int e^{-beta_i s} d nu_i) > L+_i.
inline CertReport check_H(const CompartmentModel& model, double k0 = 1.0) {
  CertReport rep;
  rep.family = "infinite_delay";
  const int m = model.dim();
  rep.items.push_back({"H1", -1, true, std::nullopt, 0.0, "C1-admissible by construction"});
  rep.items.push_back(detail::transport_item(model, "H2"));
  rep.items.push_back({"H3", -1, true, std::nullopt, 0.0, "torus driver; hull minimal by construction"});

  HypothesisResult h4{"H4", -1, true, std::nullopt, 0.0, ""};
  const double nu_sum = model.neutral_mass_sum();
  h4.margin = 1.0 - nu_sum;
  std::string why;
  if (!(nu_sum < 1.0)) why += "sum of neutral masses " + std::to_string(nu_sum) + " >= 1; ";
  for (int i = 0; i < m; ++i) {
    const auto& nu = model.neutral()[i];
    if (nu.has_atom_at_zero()) why += "nu_" + std::to_string(i + 1) + " has an atom at 0; ";
    if (!nu.is_positive()) why += "nu_" + std::to_string(i + 1) + " is not positive; ";
  }
  for (const auto& f : model.flows()) {
    const std::string id = "mu_" + std::to_string(f.to + 1) + std::to_string(f.from + 1);
    if (!f.pipe.is_positive()) why += id + " is not positive; ";
    if (std::abs(f.pipe.mass() - 1.0) > 1e-9) why += id + " does not have mass 1; ";
    if (!std::isfinite(f.pipe.first_moment())) why += id + " has infinite first moment; ";
  }
  h4.sat = why.empty();
  h4.note = why.empty() ? "neutral masses sum below 1; pipes are probability measures" : why;
  rep.items.push_back(h4);

  for (int i = 0; i < m; ++i) {
    const double lp = model.outflow_l_plus(i);
    rep.items.push_back(detail::neutral_size_item("H5", i, model.neutral()[i], lp));
    const double b = model.beta()[i];
    HypothesisResult c{"H5", i, false, b, 0.0, "configured beta"};
    c.margin = b * (1.0 - model.neutral()[i].exp_moment(b)) - lp;
    c.sat = c.margin > 0.0;
    rep.configured_beta.push_back(c);
  }
  rep.gamma = nu_sum;
  rep.k0 = k0;
  rep.khat0 = detail::khat0(model, k0);
  return rep;
}

/// Hypotheses of the finite-delay family; (G5) is tried through (G5.1) and then (G5.2).
inline CertReport check_G(const CompartmentModel& model, double k0 = 1.0) {
  CertReport rep;
  rep.family = "finite_delay";
  const int m = model.dim();
  rep.items.push_back({"G1", -1, true, std::nullopt, 0.0, "C1-admissible by construction"});
  rep.items.push_back(detail::transport_item(model, "G2"));
  rep.items.push_back({"G3", -1, true, std::nullopt, 0.0, "torus driver; hull minimal by construction"});

  HypothesisResult g4{"G4", -1, true, std::nullopt, 0.0, ""};
  std::string why;
  double gsum = 0.0;
  for (int i = 0; i < m; ++i) {
    gsum += model.gamma(i);
    if (model.gamma(i) != 0.0 && !(model.alpha(i) > 0.0)) why += "alpha_" + std::to_string(i + 1) + " <= 0; ";
    if (model.gamma(i) < 0.0) why += "gamma_" + std::to_string(i + 1) + " < 0; ";
  }
  if (!(gsum < 1.0)) why += "sum of gamma " + std::to_string(gsum) + " >= 1; ";
  for (const auto& f : model.flows())
    if (model.rho(f.to, f.from) < 0.0) why += "negative rho; ";
  g4.margin = 1.0 - gsum;
  g4.sat = why.empty();
  g4.note = why.empty() ? "sum of gamma below 1" : why;
  rep.items.push_back(g4);

  for (int i = 0; i < m; ++i) {
    const double lp = model.outflow_l_plus(i);
    const double gamma = model.gamma(i), alpha = model.alpha(i);
    auto phi1 = [&](double b) { return b * (1.0 - gamma * std::exp(b * alpha)); };

    HypothesisResult r{"G5", i, false, std::nullopt, 0.0, ""};
    if (gamma == 0.0) {
      r = {"G5", i, true, lp + 1.0, 1.0, "G5.1: no neutral term; beta = L+ + 1"};
    } else {
      const ScanResult s1 = scan_maximum(phi1, beta_scan_lo, beta_scan_hi);
      r.witness_beta = s1.beta;
      r.margin = phi1(s1.beta) - lp;
      r.sat = r.margin > 0.0;
      r.note = r.sat ? "G5.1" : "G5.1 no witness (max " + std::to_string(s1.value) + ")";
      if (!r.sat) {
        const double rho = model.rho(i, i);
        const double lm = model.self_l_minus(i);
        if (alpha >= rho) {
          auto phi2 = [&](double b) { return phi1(b) + std::exp(b * rho) * lm; };
          const ScanResult s2 = scan_maximum(phi2, std::max(lp, beta_scan_lo), beta_scan_hi);
          const double margin2 = phi2(s2.beta) - lp;
          if (margin2 > 0.0) {
            r = {"G5", i, true, s2.beta, margin2, "G5.2"};
          } else {
            r.note += "; G5.2 no witness (max " + std::to_string(s2.value) + ")";
          }
        } else {
          r.note += "; G5.2 precondition alpha >= rho_ii fails";
        }
      }
    }
    rep.items.push_back(r);

    const double b = model.beta()[i];
    HypothesisResult c{"G5", i, false, b, phi1(b) - lp, "configured beta"};
    c.sat = c.margin > 0.0;
    if (!c.sat && alpha >= model.rho(i, i) && b >= lp) {
      c.margin = phi1(b) + std::exp(b * model.rho(i, i)) * model.self_l_minus(i) - lp;
      c.sat = c.margin > 0.0;
    }
    rep.configured_beta.push_back(c);
  }
  rep.gamma = gsum;
  rep.k0 = k0;
  rep.khat0 = detail::khat0(model, k0);
  return rep;
}

/// Dispatches on the model family.
inline CertReport certify(const CompartmentModel& model, double k0 = 1.0) {
  return model.family() == ModelFamily::finite_delay ? check_G(model, k0) : check_H(model, k0);
}

/// Smooth random history: offset + three random sinusoids per component.
template <class Rng>
History random_lipschitz_history(int m, double step, double horizon, Rng& rng, double offset = 1.0,
                                 double amplitude = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd coef(m, 10);
  for (int i = 0; i < m; ++i) {
    coef(i, 0) = offset * (0.5 + u(rng));
    for (int k = 0; k < 3; ++k) {
      coef(i, 1 + 3 * k) = amplitude * (u(rng) - 0.5);
      coef(i, 2 + 3 * k) = 0.3 + 3.0 * u(rng);
      coef(i, 3 + 3 * k) = 6.283185307179586 * u(rng);
    }
  }
  return History::sample(m, step, horizon, [&](double s) {
    Eigen::VectorXd v(m);
    for (int i = 0; i < m; ++i) {
      v[i] = coef(i, 0);
      for (int k = 0; k < 3; ++k) v[i] += coef(i, 1 + 3 * k) * std::sin(coef(i, 2 + 3 * k) * s + coef(i, 3 + 3 * k));
    }
    return v;
  });
}

/// Cone element e^{-beta_i s} c in component i on [-horizon, 0] (zero elsewhere): the direction
/// that saturates (y_i(s) - x_i(s)) e^{beta_i s} <= y_i(0) - x_i(0).
inline History extremal_cone_direction(const CompartmentModel& model, int i, double c, double step,
                                       double horizon) {
  const int m = model.dim();
  const double b = model.beta()[i];
  return History::sample(m, step, horizon, [&](double s) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    v[i] = c * std::exp(-b * s);
    return v;
  });
}

/// Randomized check of F(y) - F(x) >= A (Dy - Dx) over `samples` ordered pairs x <=_A y, with
/// strict positivity required in components where y_i > x_i everywhere.
inline CertReport check_F4_F6(const CompartmentModel& model, int samples, unsigned seed = 1,
                              double tol = 1e-9) {
  CertReport rep;
  rep.family = model.family() == ModelFamily::finite_delay ? "finite_delay" : "infinite_delay";
  const int m = model.dim();
  const ConeParams cone = model.cone(tol);
  const Eigen::MatrixXd A = model.cone_matrix();
  const double horizon = std::max(1.0, model.horizon());
  const double step = std::min(0.01, horizon / 256.0);
  const double t_span = model.driver().is_periodic() ? model.driver().period() : 10.0;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = INFINITY;
  int strict_failures = 0;
  F4Witness witness;
  for (int n = 0; n < samples; ++n) {
    const History x = random_lipschitz_history(m, step, horizon, rng);
    const double t = t_span * u(rng);
    History w;
    std::string kind;
    switch (n % 4) {
    case 0:
      w = History::constant(Eigen::VectorXd::Constant(m, 0.05 + u(rng)), step, horizon);
      kind = "constant";
      break;
    case 1:
      w = random_cone_element(cone, step, horizon, rng);
      kind = "random";
      break;
    case 2: {
      const int i = static_cast<int>(u(rng) * m) % m;
      w = extremal_cone_direction(model, i, 0.01 + 0.1 * u(rng), step, horizon);
      kind = "extremal";
      break;
    }
    default:
      w = random_cone_element(cone, step, horizon, rng, 0.5, 0.8)
              .shifted(Eigen::VectorXd::Constant(m, 0.1 * u(rng)));
      kind = "mixed";
      break;
    }
    const History y = x + w;
    const Eigen::VectorXd dF = eval_F(model, t, y) - eval_F(model, t, x);
    const Eigen::VectorXd dD = apply_D(model.neutral_operator(), y) - apply_D(model.neutral_operator(), x);
    const Eigen::VectorXd margin = dF - A * dD;
    for (int i = 0; i < m; ++i) {
      if (margin[i] < worst) {
        worst = margin[i];
        witness = {n, i, kind, t, x, y};
      }
      if (w.samples().row(i).minCoeff() > 0.0 && !(margin[i] > 0.0)) ++strict_failures;
    }
  }
  if (samples == 0) worst = 0.0;
  rep.items.push_back({"F4", -1, worst >= -tol, std::nullopt, worst,
                       std::to_string(samples) + " sampled ordered pairs; worst margin reported"});
  rep.items.push_back({"F6", -1, strict_failures == 0, std::nullopt, static_cast<double>(strict_failures),
                       "strict positivity where y_i > x_i everywhere; margin = failure count"});
  if (samples > 0) rep.witness = witness;
  rep.gamma = model.neutral_operator().contraction_bound();
  return rep;
}

/// Margin of the quasimonotone inequality for one ordered pair, per component.
inline Eigen::VectorXd f4_margin(const CompartmentModel& model, double t, const History& x, const History& y) {
  const Eigen::VectorXd dD = apply_D(model.neutral_operator(), y) - apply_D(model.neutral_operator(), x);
  return eval_F(model, t, y) - eval_F(model, t, x) - model.cone_matrix() * dD;
}

} // namespace nfde
