#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "mott/error.hpp"

namespace mott {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// minimize cost . x  subject to  ineq_matrix x <= ineq_rhs, x free.
struct LinearProgram {
  VectorXd cost;
  MatrixXd ineq_matrix;
  VectorXd ineq_rhs;
};

enum class LpStatus { Optimal, Unbounded, Infeasible };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  VectorXd x;
  double value = std::numeric_limits<double>::quiet_NaN();
  /// Multipliers lambda >= 0 with cost + A^T lambda = 0 at an optimum; the
  /// dual objective is -rhs . lambda.
  VectorXd dual;
  int iterations = 0;

  bool optimal() const { return status == LpStatus::Optimal; }
  double dual_value(const LinearProgram& lp) const { return -lp.ineq_rhs.dot(dual); }
};

namespace detail {

// Dense tableau simplex on  min c.z  s.t.  M z = rhs, z >= 0  with rhs >= 0.
// Bland's rule throughout (lowest index enters, lowest basic index leaves on
// ratio ties), so the pivot sequence is fully deterministic.
class Tableau {
 public:
  static constexpr double kPivotEps = 1e-11;

  Tableau(const MatrixXd& m, const VectorXd& rhs, std::vector<int> basis)
      : t_(m.rows() + 1, m.cols() + 1), basis_(std::move(basis)) {
    t_.setZero();
    t_.topLeftCorner(m.rows(), m.cols()) = m;
    t_.topRightCorner(m.rows(), 1) = rhs;
  }

  int rows() const { return static_cast<int>(t_.rows()) - 1; }
  int cols() const { return static_cast<int>(t_.cols()) - 1; }
  const std::vector<int>& basis() const { return basis_; }

  void set_objective(const VectorXd& cost) {
    t_.row(rows()).setZero();
    t_.row(rows()).head(cols()) = cost.transpose();
    for (int r = 0; r < rows(); ++r) {
      const double cb = cost[basis_[r]];
      if (cb != 0.0) t_.row(rows()) -= cb * t_.row(r);
    }
  }

  double objective() const { return -t_(rows(), cols()); }

  void pivot(int row, int col) {
    t_.row(row) /= t_(row, col);
    for (int r = 0; r <= rows(); ++r) {
      if (r == row) continue;
      const double f = t_(r, col);
      if (f != 0.0) t_.row(r) -= f * t_.row(row);
    }
    basis_[row] = col;
  }

  enum class Outcome { Optimal, Unbounded };

  /// Columns >= allowed_cols never enter.
  Outcome run(int allowed_cols, int& iterations, int max_iterations) {
    while (true) {
      int enter = -1;
      for (int c = 0; c < allowed_cols; ++c) {
        if (t_(rows(), c) < -1e-10) {
          enter = c;
          break;
        }
      }
      if (enter < 0) return Outcome::Optimal;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < rows(); ++r) {
        const double a = t_(r, enter);
        if (a <= kPivotEps) continue;
        const double ratio = t_(r, cols()) / a;
        if (ratio < best - 1e-13 ||
            (std::abs(ratio - best) <= 1e-13 && leave >= 0 && basis_[r] < basis_[leave])) {
          best = ratio;
          leave = r;
        }
      }
      if (leave < 0) return Outcome::Unbounded;
      pivot(leave, enter);
      if (++iterations > max_iterations)
        throw Error(ErrorKind::MaxIterations, "simplex iteration cap exceeded");
    }
  }

  VectorXd primal() const {
    VectorXd z = VectorXd::Zero(cols());
    for (int r = 0; r < rows(); ++r) z[basis_[r]] = t_(r, cols());
    return z;
  }

  double entry(int r, int c) const { return t_(r, c); }

 private:
  MatrixXd t_;
  std::vector<int> basis_;
};

}  // namespace detail

/// Two-phase dense simplex. Throws Error(MaxIterations) past the pivot cap.
inline LpResult solve_lp(const LinearProgram& lp) {
  const auto n = lp.cost.size();
  const auto m = lp.ineq_matrix.rows();
  require(lp.ineq_matrix.cols() == n && lp.ineq_rhs.size() == m, ErrorKind::DimensionMismatch,
          "linear program dimensions are inconsistent");
  require(lp.cost.allFinite() && lp.ineq_matrix.allFinite() && lp.ineq_rhs.allFinite(),
          ErrorKind::InvalidArgument, "linear program has non-finite entries");

  // z = [x+ (n) | x- (n) | slack (m) | artificial (one per negative rhs row)]
  std::vector<int> flipped_rows;
  for (Eigen::Index r = 0; r < m; ++r)
    if (lp.ineq_rhs[r] < 0.0) flipped_rows.push_back(static_cast<int>(r));
  const auto n_std = 2 * n + m;
  const auto n_art = static_cast<Eigen::Index>(flipped_rows.size());

  MatrixXd mat = MatrixXd::Zero(m, n_std + n_art);
  VectorXd rhs = lp.ineq_rhs;
  std::vector<int> basis(static_cast<std::size_t>(m));
  mat.block(0, 0, m, n) = lp.ineq_matrix;
  mat.block(0, n, m, n) = -lp.ineq_matrix;
  mat.block(0, 2 * n, m, m).setIdentity();
  for (Eigen::Index r = 0; r < m; ++r) basis[r] = static_cast<int>(2 * n + r);
  for (Eigen::Index k = 0; k < n_art; ++k) {
    const int r = flipped_rows[k];
    mat.row(r) *= -1.0;
    rhs[r] *= -1.0;
    mat(r, n_std + k) = 1.0;
    basis[r] = static_cast<int>(n_std + k);
  }

  LpResult result;
  const int max_iterations = static_cast<int>(50 * (m + n_std + n_art) + 100);
  detail::Tableau tab(mat, rhs, basis);

  if (n_art > 0) {
    VectorXd phase1 = VectorXd::Zero(n_std + n_art);
    phase1.tail(n_art).setOnes();
    tab.set_objective(phase1);
    tab.run(static_cast<int>(n_std + n_art), result.iterations, max_iterations);
    if (tab.objective() > 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) {
      result.status = LpStatus::Infeasible;
      return result;
    }
    // Drive zero-level artificials out of the basis.
    for (int r = 0; r < tab.rows(); ++r) {
      if (tab.basis()[r] < n_std) continue;
      for (int c = 0; c < n_std; ++c) {
        if (std::abs(tab.entry(r, c)) > detail::Tableau::kPivotEps) {
          tab.pivot(r, c);
          break;
        }
      }
    }
  }

  VectorXd phase2 = VectorXd::Zero(n_std + n_art);
  phase2.head(n) = lp.cost;
  phase2.segment(n, n) = -lp.cost;
  tab.set_objective(phase2);
  if (tab.run(static_cast<int>(n_std), result.iterations, max_iterations) ==
      detail::Tableau::Outcome::Unbounded) {
    result.status = LpStatus::Unbounded;
    return result;
  }

  const VectorXd z = tab.primal();
  result.status = LpStatus::Optimal;
  result.x = z.head(n) - z.segment(n, n);
  result.value = lp.cost.dot(result.x);

  // Dual from the final basis: B^T y = c_B, lambda = -y in the unflipped rows.
  MatrixXd basis_matrix(m, m);
  VectorXd cb(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    basis_matrix.col(r) = mat.col(tab.basis()[r]);
    cb[r] = phase2[tab.basis()[r]];
  }
  VectorXd y = m > 0 ? VectorXd(basis_matrix.transpose().fullPivLu().solve(cb)) : VectorXd();
  for (int r : flipped_rows) y[r] = -y[r];
  result.dual = (-y).cwiseMax(0.0);
  return result;
}

}  // namespace mott
