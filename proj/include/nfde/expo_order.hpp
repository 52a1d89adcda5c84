#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "nfde/history.hpp"

namespace nfde {

/// Nonnegative off-diagonal entries (equivalently A + lambda I >= 0 for some lambda).
inline bool is_quasipositive(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("is_quasipositive: matrix must be square");
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (i != j && A(i, j) < 0.0) return false;
  return true;
}

namespace detail {

inline Eigen::MatrixXd taylor_exp(const Eigen::MatrixXd& B) {
  const auto n = B.rows();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= 40; ++k) {
    term = term * B / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() <= 1e-18 * sum.cwiseAbs().maxCoeff()) break;
  }
  return sum;
}

inline bool is_upper_triangular(const Eigen::MatrixXd& A) {
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if (A(i, j) != 0.0) return false;
  return true;
}

} // namespace detail

/// e^{A t} by scaling and squaring of a truncated Taylor series. For quasipositive A the
/// diagonal shift is applied inside each scaled factor, so every term is nonnegative and the
/// result is entrywise >= 0 without cancellation.
inline Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& A, double t) {
  if (A.rows() != A.cols()) throw std::invalid_argument("matrix_exp: matrix must be square");
  if (t < 0.0) throw std::invalid_argument("matrix_exp: t must be >= 0");
  const auto n = A.rows();
  if (n == 0 || t == 0.0) return Eigen::MatrixXd::Identity(n, n);

  const bool qp = is_quasipositive(A);
  const double shift = qp ? std::max(0.0, -A.diagonal().minCoeff()) : 0.0;
  const Eigen::MatrixXd B = (A + shift * Eigen::MatrixXd::Identity(n, n)) * t;
  const double norm = std::max(B.cwiseAbs().rowwise().sum().maxCoeff(), shift * t);
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const double scale = std::ldexp(1.0, -squarings);

  Eigen::MatrixXd E = detail::taylor_exp(B * scale);
  if (shift > 0.0) E *= std::exp(-shift * t * scale);
  for (int k = 0; k < squarings; ++k) E = E * E;
  return E;
}

/// Certificate that every eigenvalue of A has negative real part. Exact for triangular matrices,
/// Gershgorin row/column discs otherwise; nullopt when neither test decides.
inline std::optional<bool> certify_hurwitz(const Eigen::MatrixXd& A) {
  if (detail::is_upper_triangular(A) || detail::is_upper_triangular(A.transpose()))
    return (A.diagonal().array() < 0.0).all();
  auto discs = [](const Eigen::MatrixXd& M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      double radius = 0.0;
      for (Eigen::Index j = 0; j < M.cols(); ++j)
        if (j != i) radius += std::abs(M(i, j));
      if (M(i, i) + radius >= 0.0) return false;
    }
    return true;
  };
  if (discs(A) || discs(A.transpose())) return true;
  return std::nullopt;
}

enum class ConeMode { finite_window, full_line };

/// Cone of the exponential ordering: w >= 0 and w(t) >= e^{A(t-s)} w(s) for s <= t in the window.
struct ConeParams {
  Eigen::MatrixXd A;
  ConeMode mode = ConeMode::full_line;
  double window = 0.0;  // r, finite-window mode only
  double tol = 1e-9;

  static ConeParams full_line(Eigen::MatrixXd A, double tol = 1e-9) {
    ConeParams c{std::move(A), ConeMode::full_line, 0.0, tol};
    c.validate();
    return c;
  }

  static ConeParams finite_window(Eigen::MatrixXd A, double r, double tol = 1e-9) {
    ConeParams c{std::move(A), ConeMode::finite_window, r, tol};
    c.validate();
    return c;
  }

  static ConeParams diagonal(const Eigen::VectorXd& beta, double tol = 1e-9) {
    return full_line(Eigen::MatrixXd((-beta).asDiagonal()), tol);
  }

  void validate() const {
    if (!is_quasipositive(A)) throw std::invalid_argument("ConeParams: A is not quasipositive");
    if (tol < 0.0) throw std::invalid_argument("ConeParams: tol must be >= 0");
    if (mode == ConeMode::finite_window && !(window > 0.0))
      throw std::invalid_argument("ConeParams: window r must be positive");
    if (mode == ConeMode::full_line && certify_hurwitz(A) != true)
      throw std::invalid_argument("ConeParams: full-line cone needs A with eigenvalues in Re < 0 "
                                  "(not certified)");
  }

  int dim() const { return static_cast<int>(A.rows()); }
};

/// Worst violation of the cone conditions: the minimum over nodes of w_i and over adjacent
/// node pairs of (w(s+h) - e^{Ah} w(s))_i. Nonnegative iff w is in the cone exactly.
/// Adjacent pairs suffice because e^{Ah} >= 0 makes the pair condition transitive.
inline double cone_margin(const History& w, const ConeParams& cone) {
  if (w.dim() != cone.dim()) throw std::invalid_argument("cone_margin: dimension mismatch");
  const auto& s = w.samples();
  double margin = s.minCoeff();
  const double h = w.step();
  const Eigen::MatrixXd E = matrix_exp(cone.A, h);
  auto pair = [&](const Eigen::VectorXd& later, const Eigen::VectorXd& earlier, const Eigen::MatrixXd& P) {
    margin = std::min(margin, (later - P * earlier).minCoeff());
  };

  long first = 0;
  bool tail_in_window = true;
  if (cone.mode == ConeMode::finite_window && cone.window < w.horizon()) {
    tail_in_window = false;
    const double u = static_cast<double>(w.intervals()) - cone.window / h;
    first = static_cast<long>(std::ceil(u - detail::node_snap));
    const double gap = w.node_time(first) + cone.window;
    if (gap > detail::node_snap * h) pair(s.col(first), w.eval(-cone.window), matrix_exp(cone.A, gap));
  }
  if (tail_in_window) pair(s.col(0), s.col(0), E);  // constant tail joins the grid at -T
  for (long k = first; k < w.intervals(); ++k) pair(s.col(k + 1), s.col(k), E);
  return margin;
}

inline bool cone_contains(const History& w, const ConeParams& cone) {
  return cone_margin(w, cone) >= -cone.tol;
}

inline double order_margin(const History& x, const History& y, const ConeParams& cone) {
  return cone_margin(y - x, cone);
}

/// x <=_A y.
inline bool order_leq(const History& x, const History& y, const ConeParams& cone) {
  return order_margin(x, y, cone) >= -cone.tol;
}

/// Greatest lower bound construction for a finite set of histories on a common grid:
///   h = componentwise inf of (x' - A x), a' = A a + h,
/// started from the pointwise infimum at -r (finite window, with a = inf x before -r) or at -T
/// (full line). The ODE is stepped by the trapezoidal rule with h taken as the interval average
/// of each member's x' - A x, so a single member is reproduced to rounding.
inline History cone_infimum(std::span<const History> xs, const ConeParams& cone) {
  if (xs.empty()) throw std::invalid_argument("cone_infimum: empty set");
  if (!is_quasipositive(cone.A)) throw std::invalid_argument("cone_infimum: A is not quasipositive");
  if (cone.mode == ConeMode::full_line && certify_hurwitz(cone.A) != true)
    throw std::invalid_argument("cone_infimum: full-line mode needs certified Hurwitz A");
  const int m = xs.front().dim();
  const double h = xs.front().step();
  long n = 0;
  for (const auto& x : xs) {
    if (x.dim() != m || std::abs(x.step() - h) > 1e-12 * h)
      throw std::invalid_argument("cone_infimum: histories must share dimension and grid");
    n = std::max(n, x.intervals());
  }
  std::vector<Eigen::MatrixXd> grid;
  grid.reserve(xs.size());
  for (const auto& x : xs) grid.push_back(x.extended(static_cast<double>(n) * h).samples());

  Eigen::MatrixXd a(m, n + 1);
  long start = 0;
  if (cone.mode == ConeMode::finite_window && cone.window < static_cast<double>(n) * h) {
    start = static_cast<long>(std::floor(static_cast<double>(n) - cone.window / h + detail::node_snap));
    start = std::max(0L, start);
  }
  for (long k = 0; k <= start; ++k) {
    a.col(k) = grid.front().col(k);
    for (const auto& g : grid) a.col(k) = a.col(k).cwiseMin(g.col(k));
  }

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd half = 0.5 * h * cone.A;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lhs(I - half);
  const Eigen::MatrixXd rhs = I + half;
  for (long k = start; k < n; ++k) {
    Eigen::VectorXd inf_h;
    for (const auto& g : grid) {
      const Eigen::VectorXd slope =
          (g.col(k + 1) - g.col(k)) / h - cone.A * (0.5 * (g.col(k) + g.col(k + 1)));
      inf_h = inf_h.size() == 0 ? slope : inf_h.cwiseMin(slope);
    }
    a.col(k + 1) = lhs.solve(rhs * a.col(k) + h * inf_h);
  }
  return History(h, std::move(a));
}

inline History cone_infimum(const History& x, const History& y, const ConeParams& cone) {
  const History pair[] = {x, y};
  return cone_infimum(std::span<const History>(pair), cone);
}

/// y = x + c * 1, which lies above x whenever every row sum of A is <= 0.
inline History perturb_in_cone(const History& x, double c, const ConeParams& cone) {
  if (c < 0.0) throw std::invalid_argument("perturb_in_cone: c must be >= 0");
  if (cone.A.rowwise().sum().maxCoeff() > cone.tol)
    throw std::invalid_argument("perturb_in_cone: A has a positive row sum; constants are not in the cone");
  return x.shifted(Eigen::VectorXd::Constant(x.dim(), c));
}

/// Random element of the cone on [-horizon, 0]: w(-T) >= 0 (a steady state of A in full-line mode), then w(s+h) = e^{Ah} w(s) + h * g
/// with random g >= 0 (zero with probability `flat`).
template <class Rng>
History random_cone_element(const ConeParams& cone, double step, double horizon, Rng& rng,
                            double scale = 1.0, double flat = 0.3) {
  const int m = cone.dim();
  const long n = std::max(1L, detail::grid_count(horizon, step));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::MatrixXd E = matrix_exp(cone.A, step);
  Eigen::MatrixXd s(m, n + 1);
  Eigen::VectorXd start(m);
  for (int i = 0; i < m; ++i) start[i] = scale * u(rng);
  // Full line: the constant tail needs e^{Ah} w(-T) <= w(-T), so start at -A^{-1} c with c >= 0.
  if (cone.mode == ConeMode::full_line) start = (-cone.A).partialPivLu().solve(start).cwiseMax(0.0);
  s.col(0) = start;
  for (long k = 0; k < n; ++k) {
    Eigen::VectorXd g(m);
    for (int i = 0; i < m; ++i) g[i] = u(rng) < flat ? 0.0 : scale * u(rng);
    s.col(k + 1) = E * s.col(k) + step * g;
  }
  return History(step, std::move(s));
}

} // namespace nfde
