#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfde/delay_measure.hpp"
#include "nfde/expo_order.hpp"
#include "nfde/history.hpp"
#include "nfde/neutral_op.hpp"

namespace nfde {

/// sin(2 pi <wave, theta> + phase) term of the torus driver.
struct Harmonic {
  std::vector<int> wave;
  double phase = 0.0;
};

/// Explicit torus flow theta(t) = theta0 + freq * t (mod 1) standing in for the hull of the
/// time-dependent coefficients. One rational frequency gives the periodic case.
class Driver {
public:
  Driver() = default;
  Driver(std::vector<double> frequencies, std::vector<double> theta0, std::vector<Harmonic> harmonics)
      : freq_(std::move(frequencies)), theta0_(std::move(theta0)), harmonics_(std::move(harmonics)) {
    if (theta0_.empty()) theta0_.assign(freq_.size(), 0.0);
    if (theta0_.size() != freq_.size())
      throw std::invalid_argument("Driver: phase and frequency vectors differ in length");
    for (const auto& h : harmonics_)
      if (h.wave.size() != freq_.size())
        throw std::invalid_argument("Driver: harmonic wave vector has wrong length");
  }

  std::size_t torus_dim() const { return freq_.size(); }
  const std::vector<double>& frequencies() const { return freq_; }
  const std::vector<double>& initial_phase() const { return theta0_; }
  const std::vector<Harmonic>& harmonics() const { return harmonics_; }

  double theta(std::size_t k, double t) const {
    const double v = std::fmod(theta0_[k] + freq_[k] * t, 1.0);
    return v < 0.0 ? v + 1.0 : v;
  }

  double harmonic(std::size_t index, double t) const {
    const auto& h = harmonics_.at(index);
    double arg = 0.0;
    for (std::size_t k = 0; k < freq_.size(); ++k) arg += h.wave[k] * theta(k, t);
    return std::sin(2.0 * std::numbers::pi * arg + h.phase);
  }

  /// Max over torus coordinates of the circular distance between theta(t) and theta(s).
  double phase_distance(double t, double s) const {
    double d = 0.0;
    for (std::size_t k = 0; k < freq_.size(); ++k) {
      double e = std::abs(theta(k, t) - theta(k, s));
      d = std::max(d, std::min(e, 1.0 - e));
    }
    return d;
  }

  double recurrence_distance(double t) const { return phase_distance(t, 0.0); }

  bool is_autonomous() const { return harmonics_.empty() || freq_.empty(); }
  bool is_periodic() const { return !is_autonomous() && freq_.size() == 1 && freq_[0] != 0.0; }
  double period() const { return is_periodic() ? 1.0 / std::abs(freq_[0]) : 0.0; }

private:
  std::vector<double> freq_;
  std::vector<double> theta0_;
  std::vector<Harmonic> harmonics_;
};

enum class TransportFamily { linear, saturating_arctan, logistic_slope };

/// g(t, v) = coefficient * p(t) * shape(v) with p(t) = offset + amplitude * harmonic(t) >= p_min > 0.
///   linear:            shape(v) = v
///   saturating_arctan: shape(v) = atan(v)
///   logistic_slope:    shape(v) = v + kappa (softplus(v) - log 2), slope in (1, 1 + kappa)
/// Every family has g(t, 0) = 0 and dg/dv >= 0.
struct TransportFunction {
  TransportFamily family = TransportFamily::linear;
  double coefficient = 0.0;
  double kappa = 0.0;
  int harmonic = -1;  // -1: autonomous
  double amplitude = 0.0;
  double offset = 1.0;

  void validate() const {
    if (!(coefficient >= 0.0)) throw std::invalid_argument("TransportFunction: coefficient must be >= 0");
    if (!(kappa >= 0.0)) throw std::invalid_argument("TransportFunction: kappa must be >= 0");
    if (harmonic >= 0 && !(p_min() > 0.0))
      throw std::invalid_argument("TransportFunction: time factor must stay positive");
  }

  double p_min() const { return harmonic < 0 ? 1.0 : offset - std::abs(amplitude); }
  double p_max() const { return harmonic < 0 ? 1.0 : offset + std::abs(amplitude); }

  double time_factor(const Driver& d, double t) const {
    return harmonic < 0 ? 1.0 : offset + amplitude * d.harmonic(static_cast<std::size_t>(harmonic), t);
  }

  double shape(double v) const {
    switch (family) {
    case TransportFamily::linear: return v;
    case TransportFamily::saturating_arctan: return std::atan(v);
    case TransportFamily::logistic_slope: {
      const double softplus = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
      return v + kappa * (softplus - std::numbers::ln2);
    }
    }
    return v;
  }

  double value(const Driver& d, double t, double v) const {
    return coefficient * time_factor(d, t) * shape(v);
  }

  /// sup over (t, v) of dg/dv.
  double l_plus() const {
    const double slope = family == TransportFamily::logistic_slope ? 1.0 + kappa : 1.0;
    return coefficient * p_max() * slope;
  }

  /// inf over (t, v) of dg/dv.
  double l_minus() const {
    const double slope = family == TransportFamily::saturating_arctan ? 0.0 : 1.0;
    return coefficient * p_min() * slope;
  }
};

enum class ModelFamily { infinite_delay, finite_delay };

/// Transport g_ij carrying material from compartment j into compartment i through pipe mu_ij.
struct Flow {
  int to = 0;
  int from = 0;
  TransportFunction g;
  DelayMeasure pipe;
};

/// Closed compartmental system
///   d/dt [z_i(t) - int z_i(t+s) d nu_i(s)] = -sum_j g_ji(t, z_i(t)) + sum_j int g_ij(t+s, z_j(t+s)) d mu_ij(s)
/// with the exponential ordering given by A = diag(-beta).
class CompartmentModel {
public:
  CompartmentModel() = default;

  CompartmentModel(std::string name, ModelFamily family, int m, std::vector<Flow> flows,
                   std::vector<DelayMeasure> neutral, Eigen::VectorXd beta, Driver driver = {})
      : name_(std::move(name)), family_(family), m_(m), flows_(std::move(flows)),
        neutral_(std::move(neutral)), beta_(std::move(beta)), driver_(std::move(driver)) {
    if (m_ < 1) throw std::invalid_argument("CompartmentModel: need at least one compartment");
    if (neutral_.empty()) neutral_.resize(m_);
    if (static_cast<int>(neutral_.size()) != m_) throw std::invalid_argument("CompartmentModel: neutral size != m");
    if (beta_.size() != m_) throw std::invalid_argument("CompartmentModel: beta size != m");
    if ((beta_.array() <= 0.0).any()) throw std::invalid_argument("CompartmentModel: beta must be positive");
    for (const auto& nu : neutral_)
      if (nu.has_atom_at_zero()) throw std::invalid_argument("CompartmentModel: neutral measure has an atom at 0");
    for (const auto& f : flows_) {
      if (f.to < 0 || f.to >= m_ || f.from < 0 || f.from >= m_)
        throw std::invalid_argument("CompartmentModel: flow index out of range");
      f.g.validate();
      if (f.g.harmonic >= static_cast<int>(driver_.harmonics().size()))
        throw std::invalid_argument("CompartmentModel: transport refers to a missing driver harmonic");
    }
    if (family_ == ModelFamily::finite_delay) {
      for (const auto& nu : neutral_)
        if (!nu.density().cells.empty() || nu.atoms().size() > 1)
          throw std::invalid_argument("CompartmentModel: finite-delay neutral part must be a single atom");
      for (const auto& f : flows_)
        if (!f.pipe.density().cells.empty() || f.pipe.atoms().size() != 1)
          throw std::invalid_argument("CompartmentModel: finite-delay pipes must be single atoms");
    }
    D_ = NeutralOperator::diagonal(neutral_);
  }

  const std::string& name() const { return name_; }
  ModelFamily family() const { return family_; }
  int dim() const { return m_; }
  const std::vector<Flow>& flows() const { return flows_; }
  const std::vector<DelayMeasure>& neutral() const { return neutral_; }
  const Eigen::VectorXd& beta() const { return beta_; }
  const Driver& driver() const { return driver_; }
  const NeutralOperator& neutral_operator() const { return D_; }

  Eigen::MatrixXd cone_matrix() const { return Eigen::MatrixXd((-beta_).asDiagonal()); }
  ConeParams cone(double tol = 1e-9) const { return ConeParams::diagonal(beta_, tol); }

  /// Longest lag reached by any pipe or neutral measure.
  double horizon() const {
    double t = D_.support();
    for (const auto& f : flows_) t = std::max(t, f.pipe.support());
    return t;
  }

  /// sum_i nu_i((-inf, 0]).
  double neutral_mass_sum() const {
    double s = 0.0;
    for (const auto& nu : neutral_) s += nu.mass();
    return s;
  }

  /// L+_i = sum_j l+_ji (outflows from compartment i).
  double outflow_l_plus(int i) const {
    double s = 0.0;
    for (const auto& f : flows_)
      if (f.from == i) s += f.g.l_plus();
    return s;
  }

  const Flow* find_flow(int to, int from) const {
    for (const auto& f : flows_)
      if (f.to == to && f.from == from) return &f;
    return nullptr;
  }

  /// l-_ii of the self transport (0 when there is none).
  double self_l_minus(int i) const {
    const Flow* f = find_flow(i, i);
    return f ? f->g.l_minus() : 0.0;
  }

  /// Finite-delay parameters: nu_i = gamma_i delta_{-alpha_i}, mu_ij = delta_{-rho_ij}.
  double gamma(int i) const { return neutral_[i].atoms().empty() ? 0.0 : neutral_[i].atoms().front().weight; }
  double alpha(int i) const {
    return neutral_[i].atoms().empty() ? 0.0 : -neutral_[i].atoms().front().location;
  }
  double rho(int to, int from) const {
    const Flow* f = find_flow(to, from);
    if (!f || f->pipe.atoms().empty()) return 0.0;
    return -f->pipe.atoms().front().location;
  }

  /// Lipschitz constant of F in the sup norm.
  double lipschitz_bound() const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(m_);
    for (const auto& f : flows_) {
      c[f.from] += f.g.l_plus();
      c[f.to] += f.g.l_plus() * f.pipe.total_variation();
    }
    return c.maxCoeff();
  }

private:
  std::string name_;
  ModelFamily family_ = ModelFamily::infinite_delay;
  int m_ = 1;
  std::vector<Flow> flows_;
  std::vector<DelayMeasure> neutral_;
  Eigen::VectorXd beta_;
  Driver driver_;
  NeutralOperator D_;
};

/// F(omega . t, x).
template <HistoryLike H>
Eigen::VectorXd eval_F(const CompartmentModel& model, double t, const H& x) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(model.dim());
  const Driver& d = model.driver();
  for (const auto& f : model.flows()) {
    out[f.from] -= f.g.value(d, t, x.component(0.0, f.from));
    f.pipe.for_each_node(
        [&](double s, double w) { out[f.to] += w * f.g.value(d, t + s, x.component(s, f.from)); });
  }
  return out;
}

/// Total material M = sum_i D_i x + sum over flows of int (int_s^0 g(t+tau, x_from(tau)) dtau) d mu(s).
/// The inner integral uses the trapezoidal rule on the grid of x.
inline double total_mass(const CompartmentModel& model, double t, const History& x) {
  double mass = apply_D(model.neutral_operator(), x).sum();
  const double h = x.step();
  const Driver& d = model.driver();
  for (const auto& f : model.flows()) {
    auto integrand = [&](double tau) { return f.g.value(d, t + tau, x.component(tau, f.from)); };
    const double depth = f.pipe.support();
    const auto nodes = static_cast<std::size_t>(std::ceil(depth / h - detail::node_snap)) + 1;
    std::vector<double> cumulative(nodes + 1, 0.0);  // int_{-k h}^0
    std::vector<double> values(nodes + 1);
    for (std::size_t k = 0; k <= nodes; ++k) values[k] = integrand(-static_cast<double>(k) * h);
    for (std::size_t k = 1; k <= nodes; ++k)
      cumulative[k] = cumulative[k - 1] + 0.5 * h * (values[k - 1] + values[k]);
    f.pipe.for_each_node([&](double s, double w) {
      const double u = -s / h;
      auto q = static_cast<std::size_t>(std::floor(u + detail::node_snap));
      double rest = (u - static_cast<double>(q)) * h;
      double inner = cumulative[q];
      if (rest > detail::node_snap * h) inner += 0.5 * rest * (values[q] + integrand(s));
      mass += w * inner;
    });
  }
  return mass;
}

} // namespace nfde
