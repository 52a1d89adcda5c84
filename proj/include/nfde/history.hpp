#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nfde/delay_measure.hpp"

namespace nfde {

namespace detail {

// Offsets closer than this (in units of the grid step) to a node snap to the node.
inline constexpr double node_snap = 1e-9;

inline long grid_count(double length, double step) {
  const double u = length / step;
  const double r = std::round(u);
  if (std::abs(u - r) <= 1e-7 * std::max(1.0, r)) return static_cast<long>(r);
  return static_cast<long>(std::ceil(u));
}

} // namespace detail

/// Uniformly sampled function on [-T, 0] with linear interpolation between nodes and constant
/// extension x(s) = x(-T) for s < -T. Node k sits at s = -T + k*step.
class History {
public:
  History() = default;

  /// `samples` is dim x (N+1); column k holds x(-T + k*step).
  History(double step, Eigen::MatrixXd samples) : step_(step), samples_(std::move(samples)) {
    if (!(step_ > 0.0)) throw std::invalid_argument("History: step must be positive");
    if (samples_.cols() < 1 || samples_.rows() < 1)
      throw std::invalid_argument("History: need at least one sample");
  }

  /// Samples fn on the grid covering [-horizon, 0]; the horizon is rounded up to a whole step.
  static History sample(int dim, double step, double horizon,
                        const std::function<Eigen::VectorXd(double)>& fn) {
    const long n = std::max(1L, detail::grid_count(horizon, step));
    Eigen::MatrixXd s(dim, n + 1);
    for (long k = 0; k <= n; ++k) s.col(k) = fn(-static_cast<double>(n - k) * step);
    return History(step, std::move(s));
  }

  static History constant(const Eigen::VectorXd& value, double step, double horizon) {
    return sample(static_cast<int>(value.size()), step, horizon, [&](double) { return value; });
  }

  /// x(s) = intercept + slope * s.
  static History linear(const Eigen::VectorXd& intercept, const Eigen::VectorXd& slope, double step,
                        double horizon) {
    return sample(static_cast<int>(intercept.size()), step, horizon,
                  [&](double s) -> Eigen::VectorXd { return intercept + slope * s; });
  }

  int dim() const { return static_cast<int>(samples_.rows()); }
  double step() const { return step_; }
  long intervals() const { return samples_.cols() - 1; }
  long nodes() const { return samples_.cols(); }
  double horizon() const { return step_ * static_cast<double>(intervals()); }
  double node_time(long k) const { return -static_cast<double>(intervals() - k) * step_; }

  const Eigen::MatrixXd& samples() const { return samples_; }
  Eigen::MatrixXd& samples() { return samples_; }
  auto node(long k) const { return samples_.col(k); }

  double component(double s, int i) const {
    if (s > 0.0) throw std::domain_error("History::eval: s must be <= 0");
    const double u = static_cast<double>(intervals()) + s / step_;
    if (u <= 0.0) return samples_(i, 0);
    auto k = static_cast<long>(std::floor(u));
    double f = u - static_cast<double>(k);
    if (f > 1.0 - detail::node_snap) {
      ++k;
      f = 0.0;
    }
    if (k >= intervals() || f < detail::node_snap) return samples_(i, std::min(k, intervals()));
    return (1.0 - f) * samples_(i, k) + f * samples_(i, k + 1);
  }

  Eigen::VectorXd eval(double s) const {
    Eigen::VectorXd v(dim());
    for (int i = 0; i < dim(); ++i) v[i] = component(s, i);
    return v;
  }

  /// Index of the node at s; throws when s is not on the grid.
  long node_index(double s) const {
    const double u = static_cast<double>(intervals()) + s / step_;
    const double r = std::round(u);
    if (std::abs(u - r) > 1e-6 || r < 0 || r > static_cast<double>(intervals()))
      throw std::domain_error("History: time is not a grid node");
    return static_cast<long>(r);
  }

  /// Central difference at interior nodes, one-sided at the two ends.
  Eigen::VectorXd derivative(double s) const {
    const long k = node_index(s);
    if (intervals() == 0) return Eigen::VectorXd::Zero(dim());
    if (k == 0) return (samples_.col(1) - samples_.col(0)) / step_;
    if (k == intervals()) return (samples_.col(k) - samples_.col(k - 1)) / step_;
    return (samples_.col(k + 1) - samples_.col(k - 1)) / (2.0 * step_);
  }

  double sup_norm() const { return samples_.cwiseAbs().maxCoeff(); }

  /// Sup norm restricted to [-len, 0] (the tail beyond -T counts as x(-T)).
  double sup_norm_on(double len) const {
    double m = 0.0;
    for (long k = intervals(); k >= 0; --k) {
      if (node_time(k) < -len) break;
      m = std::max(m, samples_.col(k).cwiseAbs().maxCoeff());
    }
    if (len > 0.0)
      for (int i = 0; i < dim(); ++i) m = std::max(m, std::abs(component(-len, i)));
    return m;
  }

  /// Max over adjacent nodes of |x(s+step) - x(s)|_inf / step.
  double lipschitz_constant() const {
    double l = 0.0;
    for (long k = 0; k < intervals(); ++k)
      l = std::max(l, (samples_.col(k + 1) - samples_.col(k)).cwiseAbs().maxCoeff() / step_);
    return l;
  }

  /// Same grid step, the longer of the two horizons; combine(a, b) per node via tail policy.
  template <class Op>
  friend History combine(const History& x, const History& y, Op op) {
    if (x.dim() != y.dim()) throw std::invalid_argument("History: dimension mismatch");
    if (std::abs(x.step_ - y.step_) > 1e-12 * x.step_)
      throw std::invalid_argument("History: step mismatch");
    const long n = std::max(x.intervals(), y.intervals());
    Eigen::MatrixXd s(x.dim(), n + 1);
    for (long k = 0; k <= n; ++k) {
      const double t = -static_cast<double>(n - k) * x.step_;
      for (int i = 0; i < x.dim(); ++i) s(i, k) = op(x.component(t, i), y.component(t, i));
    }
    return History(x.step_, std::move(s));
  }

  friend History operator+(const History& x, const History& y) {
    return combine(x, y, [](double a, double b) { return a + b; });
  }
  friend History operator-(const History& x, const History& y) {
    return combine(x, y, [](double a, double b) { return a - b; });
  }
  friend History operator*(double c, const History& x) { return History(x.step_, c * x.samples_); }

  /// Adds a constant vector to every sample (and hence to the tail).
  History shifted(const Eigen::VectorXd& c) const {
    Eigen::MatrixXd s = samples_;
    s.colwise() += c;
    return History(step_, std::move(s));
  }

  /// Same function re-sampled with a longer horizon (extra nodes follow the constant tail).
  History extended(double horizon) const {
    const long n = std::max(intervals(), detail::grid_count(horizon, step_));
    Eigen::MatrixXd s(dim(), n + 1);
    for (long k = 0; k <= n; ++k) s.col(k) = eval(-static_cast<double>(n - k) * step_);
    return History(step_, std::move(s));
  }

private:
  double step_ = 1.0;
  Eigen::MatrixXd samples_;
};

/// Compact-open distance sum_{n=1..depth} 2^-n |x-y|_n / (1 + |x-y|_n).
inline double metric_d(const History& x, const History& y, int depth) {
  const History diff = x - y;
  double d = 0.0;
  double weight = 0.5;
  for (int n = 1; n <= depth; ++n, weight *= 0.5) {
    const double r = diff.sup_norm_on(static_cast<double>(n));
    d += weight * r / (1.0 + r);
  }
  return d;
}

/// Forward solution z on [-T0, t_end], sampled on the grid of its initial history.
/// Node n (n >= -N0) sits at time n*step. Append-only.
class Trajectory {
public:
  Trajectory() = default;

  /// `start_time` is the driver time at trajectory time 0.
  explicit Trajectory(const History& initial, double start_time = 0.0)
      : step_(initial.step()), dim_(initial.dim()), back_(initial.intervals()), start_time_(start_time) {
    data_.reserve(static_cast<std::size_t>(initial.nodes() * dim_));
    for (long k = 0; k < initial.nodes(); ++k)
      for (int i = 0; i < dim_; ++i) data_.push_back(initial.samples()(i, k));
  }

  int dim() const { return dim_; }
  double step() const { return step_; }
  double start_time() const { return start_time_; }
  long initial_intervals() const { return back_; }
  /// Index of the last stored node.
  long last() const { return static_cast<long>(data_.size()) / dim_ - 1 - back_; }
  double t_end() const { return static_cast<double>(last()) * step_; }

  double value(long n, int i) const {
    n = std::max(n, -back_);
    return data_[static_cast<std::size_t>((n + back_) * dim_ + i)];
  }
  double& value(long n, int i) { return data_[static_cast<std::size_t>((n + back_) * dim_ + i)]; }

  Eigen::VectorXd node(long n) const {
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) v[i] = value(n, i);
    return v;
  }

  void reserve(long extra_nodes) { data_.reserve(data_.size() + static_cast<std::size_t>(extra_nodes * dim_)); }

  void append(const Eigen::VectorXd& v) {
    for (int i = 0; i < dim_; ++i) data_.push_back(v[i]);
  }

  /// z(n*step + s) by linear interpolation; s <= 0 relative to node n.
  double component_from(long n, double s, int i) const {
    const double u = -s / step_;
    auto q = static_cast<long>(std::floor(u));
    double f = u - static_cast<double>(q);
    if (f > 1.0 - detail::node_snap) {
      ++q;
      f = 0.0;
    }
    const long a = n - q;
    if (f < detail::node_snap || a <= -back_) return value(a, i);
    return (1.0 - f) * value(a, i) + f * value(a - 1, i);
  }

  /// z(t) for -inf < t <= t_end.
  double component_at(double t, int i) const {
    if (t > t_end() + 1e-9 * step_) throw std::domain_error("Trajectory: time beyond t_end");
    const long n = std::min(last(), static_cast<long>(std::ceil(t / step_ - detail::node_snap)));
    return component_from(n, t - static_cast<double>(n) * step_, i);
  }

  Eigen::VectorXd at(double t) const {
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) v[i] = component_at(t, i);
    return v;
  }

  long node_index(double t) const {
    const double u = t / step_;
    const double r = std::round(u);
    if (std::abs(u - r) > 1e-6) throw std::domain_error("Trajectory: section time is off-grid");
    if (r > static_cast<double>(last()) || r < 0) throw std::domain_error("Trajectory: section time out of range");
    return static_cast<long>(r);
  }

  /// u(t)(s) = z(t+s) on [-horizon, 0].
  History section(double t, double horizon) const {
    const long n = node_index(t);
    const long len = std::max(1L, detail::grid_count(horizon, step_));
    Eigen::MatrixXd s(dim_, len + 1);
    for (long k = 0; k <= len; ++k)
      for (int i = 0; i < dim_; ++i) s(i, k) = value(n - len + k, i);
    return History(step_, std::move(s));
  }

  /// Lightweight view of the history segment z_{t_n}.
  class View {
  public:
    View(const Trajectory& tr, long n) : tr_(&tr), n_(n) {}
    int dim() const { return tr_->dim(); }
    double component(double s, int i) const { return tr_->component_from(n_, s, i); }
    long index() const { return n_; }

  private:
    const Trajectory* tr_;
    long n_;
  };

  View view(long n) const { return View(*this, n); }

private:
  double step_ = 1.0;
  int dim_ = 1;
  long back_ = 0;
  double start_time_ = 0.0;
  std::vector<double> data_;
};

} // namespace nfde
