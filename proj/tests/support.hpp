#pragma once

#include <cmath>
#include <initializer_list>

#include <Eigen/Dense>

#include "nfde/history.hpp"

namespace nfde::test {

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

inline History scalar_history(double step, double horizon, double (*fn)(double)) {
  return History::sample(1, step, horizon, [fn](double s) { return vec({fn(s)}); });
}

template <class Fn>
History scalar_fn(double step, double horizon, Fn fn) {
  return History::sample(1, step, horizon, [&](double s) { return vec({fn(s)}); });
}

inline double max_abs_diff(const History& a, const History& b) { return (a - b).sup_norm(); }

} // namespace nfde::test

#include <nlohmann/json.hpp>

#include "nfde/config.hpp"

namespace nfde::test {

/// One-compartment closed loop x' = -g(x) + int g(x(s)) d mu, with neutral atom gamma at -alpha.
inline CompartmentModel scalar_loop(double coefficient, double lag, double gamma = 0.0, double alpha = 1.0,
                                    double beta = 1.0) {
  nlohmann::json doc = {{"schema", 1}, {"family", "infinite"}, {"m", 1}, {"beta", {beta}},
                        {"transport", {{{"to", 1}, {"from", 1}, {"coefficient", coefficient},
                                        {"pipe", {{"atoms", {{-lag, 1.0}}}}}}}}};
  if (gamma != 0.0)
    doc["neutral"] = {{{"compartment", 1}, {"measure", {{"atoms", {{-alpha, gamma}}}}}}};
  return model_from_json(doc);
}

/// Finite-delay scalar model d/dt[x - gamma x(t-alpha)] = -g(t,x) + g(t-rho, x(t-rho)).
inline CompartmentModel finite_scalar(double coefficient, double gamma, double alpha, double rho,
                                      double amplitude = 0.0, double offset = 1.0) {
  nlohmann::json flow = {{"to", 1}, {"from", 1}, {"coefficient", coefficient}, {"rho", rho}};
  nlohmann::json doc = {{"schema", 1}, {"family", "finite"}, {"m", 1}, {"beta", {1.0}}};
  if (amplitude != 0.0) {
    doc["driver"] = {{"frequencies", {1.0}}, {"harmonics", {{{"wave", {1}}, {"phase", 0.0}}}}};
    flow["harmonic"] = 1;
    flow["amplitude"] = amplitude;
    flow["offset"] = offset;
  }
  doc["transport"] = {flow};
  if (gamma != 0.0) doc["neutral"] = {{{"compartment", 1}, {"gamma", gamma}, {"alpha", alpha}}};
  return model_from_json(doc);
}

} // namespace nfde::test
