#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mott/error.hpp"

namespace mott {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Constraint callback: fills values (and the Jacobian when non-null).
using ConstraintFn = std::function<void(const VectorXd& x, VectorXd& values, SparseMatrix* jacobian)>;

/// min f(x)  s.t.  c_eq(x) = 0,  c_in(x) >= 0,  lower <= x <= upper.
struct NlpProblem {
  int n_vars = 0;
  std::function<double(const VectorXd& x, VectorXd* grad)> objective;
  /// Optional exact objective Hessian. Without it the objective curvature is
  /// differenced densely.
  std::function<SparseMatrix(const VectorXd& x)> objective_hessian;
  int n_eq = 0;
  ConstraintFn eq_constraints;
  int n_ineq = 0;
  ConstraintFn ineq_constraints;
  std::optional<VectorXd> lower;
  std::optional<VectorXd> upper;
  /// Rows with constant Jacobian; they are skipped when differencing curvature.
  std::vector<int> linear_eq_rows;
  std::vector<int> linear_ineq_rows;
};

enum class NlpStatus { Converged, MaxIterations, Stalled, TimeLimit };

inline std::string to_string(NlpStatus s) {
  switch (s) {
    case NlpStatus::Converged: return "Converged";
    case NlpStatus::MaxIterations: return "MaxIterations";
    case NlpStatus::Stalled: return "Stalled";
    case NlpStatus::TimeLimit: return "TimeLimit";
  }
  return "Unknown";
}

/// First-order optimality measures at a point with given multipliers.
/// stationarity = |grad f - J_eq^T lambda - J_in^T mu - mu_lo + mu_up|_inf / max(1, |grad f|_inf).
struct KktReport {
  double feas_eq = 0.0;
  double feas_ineq = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;

  double feasibility() const { return std::max(feas_eq, feas_ineq); }
};

enum class HessianMode { FiniteDifference, Bfgs };

struct NlpOptions {
  double tol_feas = 1e-6;
  /// Feasibility tolerance for rows with constant Jacobian (and bounds); no
  /// looser than tol_feas.
  double tol_feas_linear = std::numeric_limits<double>::infinity();
  double tol_opt = 1e-5;
  int max_outer = 50;
  int max_inner = 500;
  double rho_init = 10.0;
  double rho_max = 1e8;
  HessianMode hessian = HessianMode::FiniteDifference;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  /// Wall-clock budget checked between inner iterations.
  double max_wall_ms = std::numeric_limits<double>::infinity();
  /// Per-iteration trace when non-null.
  std::ostream* log = nullptr;
};

struct NlpSolution {
  VectorXd x;
  NlpStatus status = NlpStatus::MaxIterations;
  KktReport kkt;
  VectorXd lambda_eq;
  VectorXd mu_ineq;
  VectorXd mu_lower;
  VectorXd mu_upper;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double wall_time_ms = 0.0;
  /// Max constraint violation at each accepted outer iterate; linear rows
  /// are scaled by tol_feas / tol_feas_linear.
  std::vector<double> violation_history;
};

namespace detail {

// All constraints stacked as [eq; ineq; x - lower; upper - x].
struct StackedConstraints {
  const NlpProblem& prob;
  std::vector<int> lower_idx;
  std::vector<int> upper_idx;

  explicit StackedConstraints(const NlpProblem& p) : prob(p) {
    for (int j = 0; j < p.n_vars; ++j) {
      if (p.lower && std::isfinite((*p.lower)[j])) lower_idx.push_back(j);
      if (p.upper && std::isfinite((*p.upper)[j])) upper_idx.push_back(j);
    }
  }

  int n_eq() const { return prob.n_eq; }
  int n_in() const { return prob.n_ineq + static_cast<int>(lower_idx.size() + upper_idx.size()); }
  int size() const { return n_eq() + n_in(); }

  void eval(const VectorXd& x, VectorXd& c, SparseMatrix* jac) const {
    const int n = prob.n_vars;
    c.resize(size());
    std::vector<Triplet> trips;
    const auto append = [&](const ConstraintFn& fn, int count, int row0, const char* name) {
      if (count == 0) return;
      VectorXd v(count);
      SparseMatrix j;
      fn(x, v, jac ? &j : nullptr);
      require(v.size() == count, ErrorKind::DimensionMismatch, std::string(name) + " constraint count mismatch");
      for (int k = 0; k < count; ++k)
        if (!std::isfinite(v[k]))
          throw Error(ErrorKind::CallbackFailure,
                      std::string(name) + " constraint " + std::to_string(k) + " returned a non-finite value");
      c.segment(row0, count) = v;
      if (jac) {
        require(j.rows() == count && j.cols() == n, ErrorKind::DimensionMismatch,
                std::string(name) + " Jacobian has wrong shape");
        for (int col = 0; col < j.outerSize(); ++col)
          for (SparseMatrix::InnerIterator it(j, col); it; ++it) {
            if (!std::isfinite(it.value()))
              throw Error(ErrorKind::CallbackFailure, std::string(name) + " Jacobian row " +
                                                          std::to_string(it.row()) + " is non-finite");
            trips.emplace_back(row0 + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
          }
      }
    };
    append(prob.eq_constraints, prob.n_eq, 0, "equality");
    append(prob.ineq_constraints, prob.n_ineq, prob.n_eq, "inequality");
    int row = prob.n_eq + prob.n_ineq;
    for (int j : lower_idx) {
      c[row] = x[j] - (*prob.lower)[j];
      if (jac) trips.emplace_back(row, j, 1.0);
      ++row;
    }
    for (int j : upper_idx) {
      c[row] = (*prob.upper)[j] - x[j];
      if (jac) trips.emplace_back(row, j, -1.0);
      ++row;
    }
    if (jac) {
      jac->resize(size(), n);
      jac->setFromTriplets(trips.begin(), trips.end());
    }
  }

  std::vector<char> linear_mask() const {
    std::vector<char> lin(static_cast<std::size_t>(size()), 0);
    for (int r : prob.linear_eq_rows) lin[static_cast<std::size_t>(r)] = 1;
    for (int r : prob.linear_ineq_rows) lin[static_cast<std::size_t>(prob.n_eq + r)] = 1;
    for (int r = prob.n_eq + prob.n_ineq; r < size(); ++r) lin[static_cast<std::size_t>(r)] = 1;
    return lin;
  }
};

inline double objective_value(const NlpProblem& prob, const VectorXd& x, VectorXd* grad) {
  const double f = prob.objective(x, grad);
  if (!std::isfinite(f)) throw Error(ErrorKind::CallbackFailure, "objective returned a non-finite value");
  if (grad) {
    require(grad->size() == prob.n_vars, ErrorKind::DimensionMismatch, "objective gradient has wrong length");
    if (!grad->allFinite()) throw Error(ErrorKind::CallbackFailure, "objective gradient is non-finite");
  }
  return f;
}

// Greedy distance-2 colouring of the columns of the curvature term
// sum_r w_r Hess c_r: columns sharing a colour have disjoint row supports.
// Returns, per colour, its columns; `support[j]` lists the rows of column j.
inline std::vector<std::vector<int>> colour_columns(const SparseMatrix& jac, const std::vector<char>& linear,
                                                   int n, bool dense_objective,
                                                   std::vector<std::vector<int>>& support) {
  support.assign(static_cast<std::size_t>(n), {});
  if (dense_objective) {
    std::vector<std::vector<int>> colours;
    for (int j = 0; j < n; ++j) {
      colours.push_back({j});
      support[static_cast<std::size_t>(j)].resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) support[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = i;
    }
    return colours;
  }
  const Eigen::SparseMatrix<double, Eigen::RowMajor> rows(jac);
  std::vector<std::vector<int>> vars_of_row(static_cast<std::size_t>(rows.rows()));
  std::vector<std::vector<int>> rows_of_var(static_cast<std::size_t>(n));
  for (int r = 0; r < rows.rows(); ++r) {
    if (linear[static_cast<std::size_t>(r)]) continue;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows, r); it; ++it) {
      vars_of_row[static_cast<std::size_t>(r)].push_back(static_cast<int>(it.col()));
      rows_of_var[static_cast<std::size_t>(it.col())].push_back(r);
    }
  }
  std::vector<int> mark(static_cast<std::size_t>(n), -1);
  for (int j = 0; j < n; ++j) {
    auto& sup = support[static_cast<std::size_t>(j)];
    for (int r : rows_of_var[static_cast<std::size_t>(j)])
      for (int i : vars_of_row[static_cast<std::size_t>(r)])
        if (mark[static_cast<std::size_t>(i)] != j) {
          mark[static_cast<std::size_t>(i)] = j;
          sup.push_back(i);
        }
  }
  std::vector<int> colour(static_cast<std::size_t>(n), -1);
  std::vector<int> forbidden;
  std::vector<std::vector<int>> colours;
  for (int j = 0; j < n; ++j) {
    if (support[static_cast<std::size_t>(j)].empty()) continue;
    forbidden.assign(colours.size(), 0);
    for (int i : support[static_cast<std::size_t>(j)])
      for (int r : rows_of_var[static_cast<std::size_t>(i)])
        for (int k : vars_of_row[static_cast<std::size_t>(r)])
          if (colour[static_cast<std::size_t>(k)] >= 0) forbidden[static_cast<std::size_t>(colour[k])] = 1;
    int c = 0;
    while (c < static_cast<int>(colours.size()) && forbidden[static_cast<std::size_t>(c)]) ++c;
    if (c == static_cast<int>(colours.size())) colours.emplace_back();
    colours[static_cast<std::size_t>(c)].push_back(j);
    colour[static_cast<std::size_t>(j)] = c;
  }
  return colours;
}

class AugmentedLagrangian {
 public:
  AugmentedLagrangian(const NlpProblem& prob, const NlpOptions& opts)
      : prob_(prob), opts_(opts), cons_(prob), linear_(cons_.linear_mask()) {}

  const StackedConstraints& constraints() const { return cons_; }
  const std::vector<char>& linear_rows() const { return linear_; }

  void set_scaling(const SparseMatrix& jac0) {
    scale_ = VectorXd::Ones(cons_.size());
    const Eigen::SparseMatrix<double, Eigen::RowMajor> rows(jac0);
    for (int r = 0; r < rows.rows(); ++r) {
      const double norm = rows.row(r).norm();
      // A row with no initial gradient carries no unit information.
      if (norm > 1e-12) scale_[r] = 1.0 / std::clamp(norm, 1e-3, 1e3);
    }
    lambda_ = VectorXd::Zero(cons_.size());
  }

  const VectorXd& scale() const { return scale_; }
  VectorXd& multipliers() { return lambda_; }
  double& rho() { return rho_; }

  struct Point {
    VectorXd x;
    double f = 0.0;
    VectorXd grad_f;
    VectorXd c;
    SparseMatrix jac;
    double merit = 0.0;
    VectorXd weights;
    VectorXd grad;
  };

  Point evaluate(const VectorXd& x, bool with_derivatives) const {
    Point p;
    p.x = x;
    p.f = objective_value(prob_, x, with_derivatives ? &p.grad_f : nullptr);
    cons_.eval(x, p.c, with_derivatives ? &p.jac : nullptr);
    const VectorXd cs = scale_.cwiseProduct(p.c);
    p.weights.resize(cs.size());
    p.merit = p.f;
    const int ne = cons_.n_eq();
    for (int k = 0; k < cs.size(); ++k) {
      if (k < ne) {
        p.weights[k] = lambda_[k] - rho_ * cs[k];
        p.merit += -lambda_[k] * cs[k] + 0.5 * rho_ * cs[k] * cs[k];
      } else {
        const double t = std::max(0.0, lambda_[k] - rho_ * cs[k]);
        p.weights[k] = t;
        p.merit += (t * t - lambda_[k] * lambda_[k]) / (2.0 * rho_);
      }
    }
    if (with_derivatives) p.grad = p.grad_f - scaled_jac(p.jac).transpose() * p.weights;
    return p;
  }

  SparseMatrix scaled_jac(const SparseMatrix& jac) const { return scale_.asDiagonal() * jac; }

  // Gradient of f - w^T c_scaled with w frozen; its derivative is the
  // curvature part of the merit Hessian.
  VectorXd curvature_gradient(const VectorXd& x, const VectorXd& w, bool include_objective) const {
    VectorXd c;
    SparseMatrix jac;
    cons_.eval(x, c, &jac);
    VectorXd g = -(scaled_jac(jac).transpose() * w);
    if (include_objective) {
      VectorXd gf;
      objective_value(prob_, x, &gf);
      g += gf;
    }
    return g;
  }

  // rho J_A^T J_A over rows active in the merit (all equalities, inequalities
  // with positive weight).
  SparseMatrix penalty_hessian(const Point& p) const {
    const SparseMatrix js = scaled_jac(p.jac);
    VectorXd active = VectorXd::Zero(js.rows());
    for (int k = 0; k < js.rows(); ++k) active[k] = (k < cons_.n_eq() || p.weights[k] > 0.0) ? rho_ : 0.0;
    return SparseMatrix(js.transpose() * active.asDiagonal() * js);
  }

  SparseMatrix fd_curvature(const Point& p) const {
    const int n = prob_.n_vars;
    const bool exact_objective = static_cast<bool>(prob_.objective_hessian);
    std::vector<std::vector<int>> support;
    const auto colours = colour_columns(p.jac, linear_, n, !exact_objective, support);
    const VectorXd g0 = curvature_gradient(p.x, p.weights, !exact_objective);
    std::vector<Triplet> trips;
    for (const auto& cols : colours) {
      VectorXd xp = p.x;
      VectorXd h(n);
      for (int j : cols) {
        h[j] = 1e-7 * std::max(1.0, std::abs(p.x[j]));
        xp[j] += h[j];
      }
      const VectorXd dg = curvature_gradient(xp, p.weights, !exact_objective) - g0;
      for (int j : cols)
        for (int i : support[static_cast<std::size_t>(j)]) trips.emplace_back(i, j, dg[i] / h[j]);
    }
    SparseMatrix h(n, n);
    h.setFromTriplets(trips.begin(), trips.end());
    SparseMatrix sym = 0.5 * (h + SparseMatrix(h.transpose()));
    if (exact_objective) sym += prob_.objective_hessian(p.x);
    return sym;
  }

 private:
  const NlpProblem& prob_;
  const NlpOptions& opts_;
  StackedConstraints cons_;
  std::vector<char> linear_;
  VectorXd scale_;
  VectorXd lambda_;
  double rho_ = 10.0;
};

// Solves (H + delta I) d = -g with increasing delta until the factorization
// is positive definite.
inline std::optional<VectorXd> regularized_solve(const SparseMatrix& h, const VectorXd& g, double& delta) {
  const int n = static_cast<int>(g.size());
  SparseMatrix eye(n, n);
  eye.setIdentity();
  const double base = std::max(1e-10, 1e-10 * h.coeffs().cwiseAbs().maxCoeff());
  double d = delta > 0.0 ? std::max(base, delta / 10.0) : 0.0;
  for (int attempt = 0; attempt < 60; ++attempt) {
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    ldlt.compute(h + d * eye);
    if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
      VectorXd step = ldlt.solve(-g);
      if (step.allFinite()) {
        delta = d;
        return step;
      }
    }
    d = d == 0.0 ? base : 10.0 * d;
  }
  return std::nullopt;
}

}  // namespace detail

/// KKT measures of `prob` at x for the given multipliers, from scratch.
/// Bound multipliers are per variable (zero where the bound is absent).
inline KktReport evaluate_kkt(const NlpProblem& prob, const VectorXd& x, const VectorXd& lambda_eq,
                              const VectorXd& mu_ineq, const VectorXd& mu_lower, const VectorXd& mu_upper) {
  const detail::StackedConstraints cons(prob);
  VectorXd c;
  SparseMatrix jac;
  cons.eval(x, c, &jac);
  VectorXd gf;
  detail::objective_value(prob, x, &gf);
  VectorXd mult(cons.size());
  mult.head(prob.n_eq) = lambda_eq;
  mult.segment(prob.n_eq, prob.n_ineq) = mu_ineq;
  int row = prob.n_eq + prob.n_ineq;
  for (int j : cons.lower_idx) mult[row++] = mu_lower[j];
  for (int j : cons.upper_idx) mult[row++] = mu_upper[j];
  KktReport r;
  if (prob.n_eq > 0) r.feas_eq = c.head(prob.n_eq).cwiseAbs().maxCoeff();
  if (cons.n_in() > 0) {
    const VectorXd ci = c.tail(cons.n_in());
    const VectorXd mi = mult.tail(cons.n_in());
    r.feas_ineq = (-ci).cwiseMax(0.0).maxCoeff();
    r.complementarity = mi.cwiseProduct(ci).cwiseAbs().maxCoeff();
  }
  const VectorXd resid = gf - jac.transpose() * mult;
  r.stationarity = resid.cwiseAbs().maxCoeff() / std::max(1.0, gf.cwiseAbs().maxCoeff());
  return r;
}

/// Augmented-Lagrangian (PHR) solver. Inner minimization by damped Newton on
/// the merit function with Armijo backtracking; curvature of f - w^T c is
/// either differenced with column colouring or tracked by BFGS.
inline NlpSolution solve_nlp(const NlpProblem& prob, const VectorXd& x0, const NlpOptions& opts = {}) {
  require(x0.size() == prob.n_vars, ErrorKind::DimensionMismatch, "x0 length must equal n_vars");
  require(static_cast<bool>(prob.objective), ErrorKind::InvalidArgument, "objective callback is required");
  require(prob.n_eq == 0 || static_cast<bool>(prob.eq_constraints), ErrorKind::InvalidArgument,
          "equality callback is required when n_eq > 0");
  require(prob.n_ineq == 0 || static_cast<bool>(prob.ineq_constraints), ErrorKind::InvalidArgument,
          "inequality callback is required when n_ineq > 0");
  const auto t0 = std::chrono::steady_clock::now();
  const int n = prob.n_vars;

  detail::AugmentedLagrangian al(prob, opts);
  const auto& cons = al.constraints();
  const int ne = cons.n_eq();
  {
    VectorXd c;
    SparseMatrix jac;
    cons.eval(x0, c, &jac);
    al.set_scaling(jac);
  }
  al.rho() = opts.rho_init;

  NlpSolution sol;
  VectorXd x = x0;
  double omega = 1e-2;
  double viol_prev = std::numeric_limits<double>::infinity();
  bool stalled = false;
  // Violation in units of tol_feas, with linear rows held to their own
  // tolerance.
  const double linear_factor = opts.tol_feas / std::min(opts.tol_feas, opts.tol_feas_linear);
  const auto measure = [&](const VectorXd& c) {
    double v = 0.0;
    for (Eigen::Index r = 0; r < c.size(); ++r) {
      const double e = r < ne ? std::abs(c[r]) : std::max(0.0, -c[r]);
      v = std::max(v, al.linear_rows()[static_cast<std::size_t>(r)] ? e * linear_factor : e);
    }
    return v;
  };
  MatrixXd bfgs = MatrixXd::Identity(n, n);
  double delta = 0.0;

  const auto finish = [&](NlpStatus status) {
    sol.x = x;
    sol.status = status;
    const VectorXd mult = al.scale().cwiseProduct(al.multipliers());
    sol.lambda_eq = mult.head(prob.n_eq);
    sol.mu_ineq = mult.segment(prob.n_eq, prob.n_ineq);
    sol.mu_lower = VectorXd::Zero(n);
    sol.mu_upper = VectorXd::Zero(n);
    int row = prob.n_eq + prob.n_ineq;
    for (int j : cons.lower_idx) sol.mu_lower[j] = mult[row++];
    for (int j : cons.upper_idx) sol.mu_upper[j] = mult[row++];
    sol.kkt = evaluate_kkt(prob, x, sol.lambda_eq, sol.mu_ineq, sol.mu_lower, sol.mu_upper);
    if (status == NlpStatus::Converged &&
        (sol.kkt.feasibility() > opts.tol_feas || sol.kkt.stationarity > opts.tol_opt))
      sol.status = NlpStatus::MaxIterations;
    sol.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  };

  const auto out_of_time = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() >
           opts.max_wall_ms;
  };
  bool timed_out = false;

  for (int outer = 0; outer < opts.max_outer && !timed_out; ++outer) {
    sol.outer_iterations = outer + 1;
    // Inner minimization of the merit function.
    auto p = al.evaluate(x, true);
    for (int inner = 0; inner < opts.max_inner; ++inner) {
      const double gnorm = p.grad.cwiseAbs().maxCoeff();
      if (gnorm <= omega * std::max(1.0, p.grad_f.cwiseAbs().maxCoeff())) break;
      if (out_of_time()) {
        timed_out = true;
        break;
      }
      ++sol.inner_iterations;
      std::optional<VectorXd> step;
      if (opts.hessian == HessianMode::FiniteDifference) {
        SparseMatrix curvature;
        try {
          curvature = al.fd_curvature(p);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::CallbackFailure && e.kind() != ErrorKind::DegenerateGradient) throw;
          // A differencing probe left the domain; fall back to Gauss-Newton.
          curvature.resize(n, n);
        }
        step = detail::regularized_solve(SparseMatrix(curvature + al.penalty_hessian(p)), p.grad, delta);
      } else {
        const MatrixXd h = bfgs + MatrixXd(al.penalty_hessian(p));
        Eigen::LDLT<MatrixXd> ldlt(h);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all())
          step = ldlt.solve(-p.grad);
        if (!step || !step->allFinite()) {
          bfgs = MatrixXd::Identity(n, n);
          step = detail::regularized_solve(SparseMatrix(MatrixXd(h).sparseView()), p.grad, delta);
        }
      }
      VectorXd d = step ? *step : VectorXd(-p.grad);
      double slope = p.grad.dot(d);
      if (!(slope < 0.0)) {
        d = -p.grad;
        slope = -p.grad.squaredNorm();
      }
      double alpha = 1.0;
      std::optional<decltype(p)> next;
      for (int ls = 0; ls < 60; ++ls) {
        try {
          auto trial = al.evaluate(x + alpha * d, false);
          if (trial.merit <= p.merit + opts.armijo_c * alpha * slope) {
            next = al.evaluate(x + alpha * d, true);
            break;
          }
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::CallbackFailure && e.kind() != ErrorKind::DegenerateGradient) throw;
        }
        alpha *= opts.armijo_shrink;
      }
      if (!next) break;
      if (opts.hessian == HessianMode::Bfgs) {
        const VectorXd s = next->x - x;
        const VectorXd y = al.curvature_gradient(next->x, p.weights, true) - al.curvature_gradient(x, p.weights, true);
        const VectorXd bs = bfgs * s;
        const double sbs = s.dot(bs);
        double sy = s.dot(y);
        VectorXd r = y;
        if (sy < 0.2 * sbs) {  // Powell damping keeps the update positive definite
          const double theta = 0.8 * sbs / (sbs - sy);
          r = theta * y + (1.0 - theta) * bs;
          sy = s.dot(r);
        }
        if (sy > 1e-12 * s.norm() * r.norm() && sbs > 0.0)
          bfgs += (r * r.transpose()) / sy - (bs * bs.transpose()) / sbs;
        else
          bfgs = MatrixXd::Identity(n, n);
      }
      if (opts.log)
        *opts.log << "  inner " << inner << " merit " << next->merit << " |grad| " << gnorm << " alpha " << alpha
                  << " delta " << delta << "\n";
      x = next->x;
      p = std::move(*next);
      if ((alpha * d).cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, x.cwiseAbs().maxCoeff())) break;
    }

    if (timed_out) break;
    const double viol = measure(p.c);
    if (opts.log)
      *opts.log << "outer " << outer << " rho " << al.rho() << " viol " << viol << " f " << p.f << "\n";
    const double floor = 0.1 * opts.tol_feas;
    if (outer > 0 && viol > std::max(viol_prev, floor)) {
      // Reject: restore the last accepted iterate and stiffen the penalty.
      x = sol.x;
      if (al.rho() >= opts.rho_max) {
        stalled = true;
        break;
      }
      al.rho() = std::min(10.0 * al.rho(), opts.rho_max);
      continue;
    }
    sol.x = x;
    sol.violation_history.push_back(viol);
    al.multipliers() = p.weights;
    const VectorXd g_lag = p.grad;  // equals grad f - J^T lambda_new
    const double stat = g_lag.cwiseAbs().maxCoeff() / std::max(1.0, p.grad_f.cwiseAbs().maxCoeff());
    if (viol <= opts.tol_feas && stat <= opts.tol_opt) return finish(NlpStatus::Converged);
    if (viol > 0.25 * viol_prev) al.rho() = std::min(10.0 * al.rho(), opts.rho_max);
    omega = std::max(0.1 * omega, 0.1 * opts.tol_opt);
    viol_prev = std::min(viol_prev, viol);
  }
  x = sol.x.size() == n ? sol.x : x;
  if (timed_out) return finish(NlpStatus::TimeLimit);
  return finish(stalled ? NlpStatus::Stalled : NlpStatus::MaxIterations);
}

}  // namespace mott
