#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace nfde {

/// Anything that can be sampled like a vector-valued function on (-inf, 0].
template <class H>
concept HistoryLike = requires(const H& h, double s, int i) {
  { h.dim() } -> std::convertible_to<int>;
  { h.component(s, i) } -> std::convertible_to<double>;
};

/// Signed Borel measure on (-inf, 0] made of point masses plus a piecewise-constant
/// density. Density cell k covers [-(k+1)*step, -k*step] and carries the mass of that cell;
/// quadrature places that mass at the cell midpoint.
class DelayMeasure {
public:
  struct Atom {
    double location;
    double weight;
  };

  struct Density {
    double step = 0.0;
    std::vector<double> cells;

    double horizon() const { return step * static_cast<double>(cells.size()); }
    double midpoint(std::size_t k) const { return -(static_cast<double>(k) + 0.5) * step; }
  };

  DelayMeasure() = default;

  explicit DelayMeasure(std::vector<Atom> atoms) : DelayMeasure(std::move(atoms), Density{}) {}

  DelayMeasure(std::vector<Atom> atoms, Density density, bool no_atom_at_zero = false)
      : density_(std::move(density)), no_atom_at_zero_(no_atom_at_zero) {
    for (const auto& a : atoms) {
      if (!std::isfinite(a.location) || !std::isfinite(a.weight))
        throw std::invalid_argument("DelayMeasure: non-finite atom");
      if (a.location > 0.0)
        throw std::invalid_argument("DelayMeasure: atom location must be <= 0");
    }
    if (!density_.cells.empty()) {
      if (!(density_.step > 0.0) || !std::isfinite(density_.step))
        throw std::invalid_argument("DelayMeasure: density step must be positive");
      for (double w : density_.cells)
        if (!std::isfinite(w)) throw std::invalid_argument("DelayMeasure: non-finite density cell");
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.location > b.location; });
    for (const auto& a : atoms) {
      if (!atoms_.empty() && atoms_.back().location == a.location)
        atoms_.back().weight += a.weight;
      else
        atoms_.push_back(a);
    }
    std::erase_if(atoms_, [](const Atom& a) { return a.weight == 0.0; });
    if (no_atom_at_zero_ && has_atom_at_zero())
      throw std::invalid_argument("DelayMeasure: atom at 0 not allowed");
  }

  static DelayMeasure dirac(double location, double weight = 1.0) {
    return DelayMeasure({{location, weight}});
  }

  /// Uniform density of total `mass` on [lo, hi] (both multiples of `step`, lo < hi <= 0).
  static DelayMeasure uniform(double lo, double hi, double mass, double step) {
    if (!(lo < hi) || hi > 0.0 || !(step > 0.0))
      throw std::invalid_argument("DelayMeasure::uniform: bad interval");
    const auto first = static_cast<std::size_t>(std::llround(-hi / step));
    const auto last = static_cast<std::size_t>(std::llround(-lo / step));
    if (std::abs(first * step + hi) > 1e-9 * step || std::abs(last * step + lo) > 1e-9 * step)
      throw std::invalid_argument("DelayMeasure::uniform: interval not aligned to step");
    Density d{step, std::vector<double>(last, 0.0)};
    for (std::size_t k = first; k < last; ++k)
      d.cells[k] = mass / static_cast<double>(last - first);
    return DelayMeasure({}, std::move(d));
  }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const Density& density() const noexcept { return density_; }
  bool no_atom_at_zero() const noexcept { return no_atom_at_zero_; }

  bool has_atom_at_zero() const {
    return std::any_of(atoms_.begin(), atoms_.end(),
                       [](const Atom& a) { return a.location == 0.0; });
  }

  bool is_zero() const {
    return atoms_.empty() &&
           std::all_of(density_.cells.begin(), density_.cells.end(), [](double w) { return w == 0.0; });
  }

  bool is_positive() const {
    return std::all_of(atoms_.begin(), atoms_.end(), [](const Atom& a) { return a.weight >= 0.0; }) &&
           std::all_of(density_.cells.begin(), density_.cells.end(), [](double w) { return w >= 0.0; });
  }

  /// Calls fn(location, weight) for every atom and every nonzero density cell (at its midpoint).
  template <class Fn>
  void for_each_node(Fn&& fn) const {
    for (const auto& a : atoms_) fn(a.location, a.weight);
    for (std::size_t k = 0; k < density_.cells.size(); ++k)
      if (density_.cells[k] != 0.0) fn(density_.midpoint(k), density_.cells[k]);
  }

  /// Sum of w * f(s) over the quadrature nodes.
  template <class Fn>
  double integrate_fn(Fn&& f) const {
    double acc = 0.0;
    for_each_node([&](double s, double w) { acc += w * f(s); });
    return acc;
  }

  /// Signed total mass mu((-inf, 0]).
  double mass() const {
    return integrate_fn([](double) { return 1.0; });
  }

  double total_variation() const {
    double acc = 0.0;
    for_each_node([&](double, double w) { acc += std::abs(w); });
    return acc;
  }

  /// |mu|((-inf, -T]). A density cell is treated as uniformly spread over its interval.
  double tail_mass(double horizon) const {
    if (horizon < 0.0) throw std::invalid_argument("tail_mass: horizon must be >= 0");
    double acc = 0.0;
    for (const auto& a : atoms_)
      if (a.location <= -horizon) acc += std::abs(a.weight);
    const double h = density_.step;
    for (std::size_t k = 0; k < density_.cells.size(); ++k) {
      const double near = static_cast<double>(k) * h;  // |right end|
      const double far = near + h;                     // |left end|
      double fraction = 0.0;
      if (near >= horizon)
        fraction = 1.0;
      else if (far > horizon)
        fraction = (far - horizon) / h;
      acc += fraction * std::abs(density_.cells[k]);
    }
    return acc;
  }

  /// Integral of |s| against |mu|.
  double first_moment() const {
    double acc = 0.0;
    for_each_node([&](double s, double w) { acc += std::abs(s) * std::abs(w); });
    return acc;
  }

  /// Integral of exp(-beta s) d mu(s); +inf on overflow.
  double exp_moment(double beta) const {
    return integrate_fn([beta](double s) { return std::exp(-beta * s); });
  }

  /// Smallest T >= 0 with |mu|((-inf, -T)) = 0.
  double support() const {
    double t = atoms_.empty() ? 0.0 : -atoms_.back().location;
    for (std::size_t k = density_.cells.size(); k-- > 0;)
      if (density_.cells[k] != 0.0) {
        t = std::max(t, static_cast<double>(k + 1) * density_.step);
        break;
      }
    return t;
  }

  /// Smallest |s| over the quadrature nodes; +inf for the zero measure.
  double min_lag() const {
    double lag = INFINITY;
    for_each_node([&](double s, double) { lag = std::min(lag, -s); });
    return lag;
  }

  DelayMeasure scaled(double c) const {
    auto atoms = atoms_;
    for (auto& a : atoms) a.weight *= c;
    auto d = density_;
    for (auto& w : d.cells) w *= c;
    return DelayMeasure(std::move(atoms), std::move(d), no_atom_at_zero_);
  }

private:
  std::vector<Atom> atoms_;
  Density density_;
  bool no_atom_at_zero_ = false;
};

/// Componentwise integral of a history against a measure.
template <HistoryLike H>
Eigen::VectorXd integrate(const DelayMeasure& mu, const H& f) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(f.dim());
  mu.for_each_node([&](double s, double w) {
    for (int i = 0; i < f.dim(); ++i) out[i] += w * f.component(s, i);
  });
  return out;
}

} // namespace nfde
