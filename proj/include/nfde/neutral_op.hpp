#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfde/delay_measure.hpp"
#include "nfde/error.hpp"
#include "nfde/history.hpp"

namespace nfde {

/// D x = x(0) - int [d nu(s)] x(s), with nu an m x m matrix of measures carrying no mass at 0.
class NeutralOperator {
public:
  NeutralOperator() = default;

  explicit NeutralOperator(std::vector<std::vector<DelayMeasure>> entries) : nu_(std::move(entries)) {
    for (const auto& row : nu_) {
      if (row.size() != nu_.size()) throw std::invalid_argument("NeutralOperator: entries must be square");
      for (const auto& e : row)
        if (e.has_atom_at_zero()) throw std::invalid_argument("NeutralOperator: measure has an atom at 0");
    }
  }

  static NeutralOperator zero(int m) {
    return NeutralOperator(std::vector<std::vector<DelayMeasure>>(m, std::vector<DelayMeasure>(m)));
  }

  static NeutralOperator diagonal(const std::vector<DelayMeasure>& diag) {
    const auto m = diag.size();
    std::vector<std::vector<DelayMeasure>> e(m, std::vector<DelayMeasure>(m));
    for (std::size_t i = 0; i < m; ++i) e[i][i] = diag[i];
    return NeutralOperator(std::move(e));
  }

  int dim() const { return static_cast<int>(nu_.size()); }
  const DelayMeasure& entry(int i, int j) const { return nu_[i][j]; }

  bool is_diagonal() const {
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j)
        if (i != j && !nu_[i][j].is_zero()) return false;
    return true;
  }

  bool is_zero() const {
    for (const auto& row : nu_)
      for (const auto& e : row)
        if (!e.is_zero()) return false;
    return true;
  }

  /// max_i sum_j |nu_ij|((-inf,0]); bounds the norm of the subtracted part.
  double contraction_bound() const {
    double g = 0.0;
    for (const auto& row : nu_) {
      double r = 0.0;
      for (const auto& e : row) r += e.total_variation();
      g = std::max(g, r);
    }
    return g;
  }

  bool is_positive() const {
    for (const auto& row : nu_)
      for (const auto& e : row)
        if (!e.is_positive()) return false;
    return true;
  }

  double support() const {
    double t = 0.0;
    for (const auto& row : nu_)
      for (const auto& e : row) t = std::max(t, e.support());
    return t;
  }

  double min_lag() const {
    double t = INFINITY;
    for (const auto& row : nu_)
      for (const auto& e : row) t = std::min(t, e.min_lag());
    return t;
  }

  /// (int [d nu(theta)] x(theta + s))_i for a history-like x.
  template <HistoryLike H>
  double subtracted(const H& x, double s, int i) const {
    double acc = 0.0;
    for (int j = 0; j < dim(); ++j)
      nu_[i][j].for_each_node([&](double theta, double w) { acc += w * x.component(theta + s, j); });
    return acc;
  }

private:
  std::vector<std::vector<DelayMeasure>> nu_;
};

template <HistoryLike H>
Eigen::VectorXd apply_D(const NeutralOperator& D, const H& x) {
  Eigen::VectorXd out(D.dim());
  for (int i = 0; i < D.dim(); ++i) out[i] = x.component(0.0, i) - D.subtracted(x, 0.0, i);
  return out;
}

/// (D^ x)(s) = D x_s on the grid of x.
inline History apply_Dhat(const NeutralOperator& D, const History& x) {
  Eigen::MatrixXd s(x.dim(), x.nodes());
  for (long k = 0; k < x.nodes(); ++k) {
    const double t = x.node_time(k);
    for (int i = 0; i < x.dim(); ++i) s(i, k) = x.samples()(i, k) - D.subtracted(x, t, i);
  }
  return History(x.step(), std::move(s));
}

struct InversionResult {
  History x;
  int iterations = 0;
  /// Sup-norm size of each sweep's update.
  std::vector<double> updates;
};

/// Upper bound on the sweeps invert_Dhat needs: ceil(log(tol/|h|)/log(gamma)) + 1.
inline int neumann_iteration_bound(double gamma, double h_norm, double tol) {
  if (h_norm <= tol || gamma <= 0.0) return 1;
  return static_cast<int>(std::ceil(std::log(tol / h_norm) / std::log(gamma))) + 1;
}

/// Solves D^ x = h by the Neumann fixed point x <- h + int [d nu] x(. + s), sweeping the whole
/// window each pass. Needs the contraction bound gamma < 1.
inline InversionResult invert_Dhat(const NeutralOperator& D, const History& h, double tol,
                                   int max_iterations = -1) {
  const double gamma = D.contraction_bound();
  if (!(gamma < 1.0))
    throw stability_error(gamma, "invert_Dhat: contraction bound " + std::to_string(gamma) + " >= 1");
  if (max_iterations < 0) max_iterations = neumann_iteration_bound(gamma, h.sup_norm(), tol) + 2;

  InversionResult r{h, 0, {}};
  History next = h;
  while (true) {
    for (long k = 0; k < h.nodes(); ++k) {
      const double t = h.node_time(k);
      for (int i = 0; i < h.dim(); ++i)
        next.samples()(i, k) = h.samples()(i, k) + D.subtracted(r.x, t, i);
    }
    const double update = (next.samples() - r.x.samples()).cwiseAbs().maxCoeff();
    std::swap(r.x, next);
    ++r.iterations;
    r.updates.push_back(update);
    if (update <= tol) return r;
    if (r.iterations >= max_iterations)
      throw convergence_error("invert_Dhat: no convergence after " + std::to_string(r.iterations) +
                                  " sweeps",
                              update);
  }
}

struct StabilityReport {
  double gamma = 0.0;
  bool stable = true;
  bool positive = true;
  std::string note;
};

inline StabilityReport check_stability(const NeutralOperator& D) {
  StabilityReport r;
  r.gamma = D.contraction_bound();
  r.stable = r.gamma < 1.0;
  r.positive = D.is_positive();
  r.note = "stability certified by the sufficient contraction bound gamma < 1";
  return r;
}

/// Whether A D x = D A x. Exact for diagonal A with diagonal nu and for scalar A; otherwise a
/// randomized check over `samples` smooth histories.
inline bool check_commutation(const NeutralOperator& D, const Eigen::MatrixXd& A, double tol = 1e-10,
                              int samples = 32, unsigned seed = 12345) {
  const int m = D.dim();
  if (A.rows() != m || A.cols() != m) throw std::invalid_argument("check_commutation: size mismatch");
  const Eigen::MatrixXd off = A - Eigen::MatrixXd(A.diagonal().asDiagonal());
  const bool a_diag = off.cwiseAbs().maxCoeff() == 0.0;
  if (a_diag && D.is_diagonal()) return true;
  if (a_diag && (A.diagonal().array() == A(0, 0)).all()) return true;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> freq(0.2, 3.0);
  const double horizon = D.support() + 1.0;
  for (int n = 0; n < samples; ++n) {
    Eigen::VectorXd a(m), b(m), w(m);
    for (int i = 0; i < m; ++i) {
      a[i] = coef(rng);
      b[i] = coef(rng);
      w[i] = freq(rng);
    }
    const History x = History::sample(m, 1.0 / 64.0, horizon, [&](double s) -> Eigen::VectorXd {
      return a + (b.array() * (w.array() * s).sin()).matrix();
    });
    const History ax(x.step(), A * x.samples());
    const Eigen::VectorXd lhs = A * apply_D(D, x);
    const Eigen::VectorXd rhs = apply_D(D, ax);
    if ((lhs - rhs).cwiseAbs().maxCoeff() > tol * (1.0 + lhs.cwiseAbs().maxCoeff())) return false;
  }
  return true;
}

} // namespace nfde
