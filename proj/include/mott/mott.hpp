#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>
#include <optional>
#include <string>

#include "mott/bodies.hpp"

namespace mott {

/// Unknowns of one collision pair: witness points, signed offset and its
/// unit direction, with x_j - x_i = phi * a at a solution.
struct ContactVariables {
  VectorXd x_i;
  VectorXd x_j;
  double phi = 0.0;
  VectorXd a;

  static int size(int dim) { return 3 * dim + 1; }
  int dim() const { return static_cast<int>(x_i.size()); }

  /// Stacked as [x_i; x_j; phi; a].
  VectorXd pack() const {
    const int d = dim();
    VectorXd v(size(d));
    v << x_i, x_j, phi, a;
    return v;
  }

  static ContactVariables unpack(const VectorXd& v, int dim) {
    require(v.size() == size(dim), ErrorKind::DimensionMismatch, "contact vector has wrong length");
    return {v.segment(0, dim), v.segment(dim, dim), v[2 * dim], v.segment(2 * dim + 1, dim)};
  }
};

/// Rows: [g_i(x_i); g_j(x_j); a - n_i(x_i); a + n_j(x_j); (x_j - x_i) - phi a]
/// where n is the unit outward normal.
struct MottResidual {
  double boundary_i = 0.0;
  double boundary_j = 0.0;
  VectorXd dir_i;
  VectorXd dir_j;
  VectorXd offset;

  static int size(int dim) { return 2 + 3 * dim; }

  VectorXd stacked() const {
    VectorXd r(size(static_cast<int>(offset.size())));
    r << boundary_i, boundary_j, dir_i, dir_j, offset;
    return r;
  }

  double inf_norm() const { return stacked().cwiseAbs().maxCoeff(); }
};

namespace detail {

struct PairEval {
  LocalEval ei;
  LocalEval ej;
  double norm_i = 0.0;
  double norm_j = 0.0;
};

inline PairEval eval_pair(const Body& bi, const Pose& pi, const Body& bj, const Pose& pj,
                          const ContactVariables& v, bool with_hessian, double grad_eps) {
  PairEval e{evaluate(bi, v.x_i, pi, with_hessian), evaluate(bj, v.x_j, pj, with_hessian)};
  e.norm_i = e.ei.grad.norm();
  e.norm_j = e.ej.grad.norm();
  if (e.norm_i < grad_eps || e.norm_j < grad_eps)
    throw Error(ErrorKind::DegenerateGradient, "gradient norm below threshold at a witness point");
  return e;
}

inline MottResidual residual_from(const PairEval& e, const ContactVariables& v) {
  return {e.ei.g, e.ej.g, v.a - e.ei.grad / e.norm_i, v.a + e.ej.grad / e.norm_j,
          (v.x_j - v.x_i) - v.phi * v.a};
}

// d(grad/|grad|)/dx = (I - n n^T) H / |grad|
inline MatrixXd normal_derivative(const VectorXd& grad, double norm, const MatrixXd& dgrad) {
  const VectorXd n = grad / norm;
  return (dgrad - n * (n.transpose() * dgrad)) / norm;
}

inline MatrixXd jacobian_from(const PairEval& e, const ContactVariables& v) {
  const int d = v.dim();
  const int ix = 0, jx = d, ph = 2 * d, ac = 2 * d + 1;
  const int rbi = 0, rbj = 1, rdi = 2, rdj = 2 + d, rof = 2 + 2 * d;
  MatrixXd jac = MatrixXd::Zero(MottResidual::size(d), ContactVariables::size(d));
  jac.block(rbi, ix, 1, d) = e.ei.grad.transpose();
  jac.block(rbj, jx, 1, d) = e.ej.grad.transpose();
  jac.block(rdi, ix, d, d) = -normal_derivative(e.ei.grad, e.norm_i, e.ei.hess);
  jac.block(rdi, ac, d, d).setIdentity();
  jac.block(rdj, jx, d, d) = normal_derivative(e.ej.grad, e.norm_j, e.ej.hess);
  jac.block(rdj, ac, d, d).setIdentity();
  jac.block(rof, ix, d, d) = -MatrixXd::Identity(d, d);
  jac.block(rof, jx, d, d).setIdentity();
  jac.block(rof, ph, d, 1) = -v.a;
  jac.block(rof, ac, d, d) = -v.phi * MatrixXd::Identity(d, d);
  return jac;
}

}  // namespace detail

inline MottResidual mott_residual(const Body& body_i, const Pose& pose_i, const Body& body_j, const Pose& pose_j,
                                  const ContactVariables& v, double grad_eps = kGradEps) {
  return detail::residual_from(detail::eval_pair(body_i, pose_i, body_j, pose_j, v, false, grad_eps), v);
}

/// Jacobian of mott_residual().stacked() with respect to [x_i; x_j; phi; a].
inline MatrixXd mott_jacobian(const Body& body_i, const Pose& pose_i, const Body& body_j, const Pose& pose_j,
                              const ContactVariables& v, double grad_eps = kGradEps) {
  return detail::jacobian_from(detail::eval_pair(body_i, pose_i, body_j, pose_j, v, true, grad_eps), v);
}

/// Residual Jacobians with respect to the pose parameters of body i and body j.
struct MottPoseJacobians {
  MatrixXd wrt_pose_i;
  MatrixXd wrt_pose_j;
};

inline MottPoseJacobians mott_pose_jacobians(const Body& body_i, const Pose& pose_i, const Body& body_j,
                                             const Pose& pose_j, const ContactVariables& v,
                                             double grad_eps = kGradEps) {
  const int d = v.dim();
  const auto pji = pose_jacobians(body_i, v.x_i, pose_i);
  const auto pjj = pose_jacobians(body_j, v.x_j, pose_j);
  const VectorXd gi = eval_grad(body_i, v.x_i, pose_i);
  const VectorXd gj = eval_grad(body_j, v.x_j, pose_j);
  const double ni = gi.norm(), nj = gj.norm();
  if (ni < grad_eps || nj < grad_eps)
    throw Error(ErrorKind::DegenerateGradient, "gradient norm below threshold at a witness point");
  MottPoseJacobians out{MatrixXd::Zero(MottResidual::size(d), pose_i.n_params()),
                        MatrixXd::Zero(MottResidual::size(d), pose_j.n_params())};
  out.wrt_pose_i.row(0) = pji.dg_dq.transpose();
  out.wrt_pose_i.middleRows(2, d) = -detail::normal_derivative(gi, ni, pji.dgrad_dq);
  out.wrt_pose_j.row(1) = pjj.dg_dq.transpose();
  out.wrt_pose_j.middleRows(2 + d, d) = detail::normal_derivative(gj, nj, pjj.dgrad_dq);
  return out;
}

/// (c_j - c_i) . grad g_i(x_i) >= 0 rejects the maximum-offset branch.
inline double uniqueness_margin(const Body& body_i, const Pose& pose_i, const Body& body_j, const Pose& pose_j,
                                const ContactVariables& v) {
  const VectorXd ci = pose_i.to_world(body_center(body_i));
  const VectorXd cj = pose_j.to_world(body_center(body_j));
  return (cj - ci).dot(eval_grad(body_i, v.x_i, pose_i));
}

/// Boundary crossing of g along origin + t dir for t in [0, t_max]; origin
/// must be strictly inside.
inline VectorXd ray_boundary(const Body& body, const Pose& pose, const VectorXd& origin, const VectorXd& dir,
                             double t_max) {
  require(eval_g(body, origin, pose) < 0.0, ErrorKind::InvalidArgument, "ray origin is not inside the body");
  double lo = 0.0, hi = t_max;
  while (eval_g(body, origin + hi * dir, pose) <= 0.0) {
    hi *= 2.0;
    require(hi < 1e12, ErrorKind::InvalidBody, "ray never leaves the body");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (eval_g(body, origin + mid * dir, pose) <= 0.0 ? lo : hi) = mid;
  }
  return origin + 0.5 * (lo + hi) * dir;
}

/// Witness points where the segment between the interior centers leaves each
/// body, with a along c_j - c_i.
inline ContactVariables center_ray_initialization(const Body& body_i, const Pose& pose_i, const Body& body_j,
                                                  const Pose& pose_j) {
  const VectorXd ci = pose_i.to_world(body_center(body_i));
  const VectorXd cj = pose_j.to_world(body_center(body_j));
  const double dist = (cj - ci).norm();
  require(dist > 1e-12, ErrorKind::InvalidArgument, "body centers coincide; offset direction is undefined");
  const VectorXd a0 = (cj - ci) / dist;
  const VectorXd xi = ray_boundary(body_i, pose_i, ci, a0, 2.0 * bounding_radius(body_i) + 1e-3);
  const VectorXd xj = ray_boundary(body_j, pose_j, cj, -a0, 2.0 * bounding_radius(body_j) + 1e-3);
  return {xi, xj, a0.dot(xj - xi), a0};
}

struct StaticMottOptions {
  double tol = 1e-8;
  int max_iterations = 200;
  double lambda_init = 1e-3;
  bool enforce_uniqueness = true;
  double grad_eps = kGradEps;
};

struct StaticMottSolution {
  ContactVariables vars;
  int iterations = 0;
  double residual_inf = 0.0;
  double uniqueness_margin = 0.0;
  bool restarted = false;
};

namespace detail {

struct LmOutcome {
  ContactVariables vars;
  int iterations = 0;
  double residual_inf = std::numeric_limits<double>::infinity();
  bool converged = false;
};

inline LmOutcome levenberg_marquardt(const Body& bi, const Pose& pi, const Body& bj, const Pose& pj,
                                     ContactVariables v, const StaticMottOptions& opts, double lambda) {
  const int d = v.dim();
  LmOutcome out;
  PairEval e = eval_pair(bi, pi, bj, pj, v, true, opts.grad_eps);
  VectorXd r = residual_from(e, v).stacked();
  double cost = r.squaredNorm();
  for (int it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it;
    if (r.cwiseAbs().maxCoeff() <= opts.tol) {
      out.converged = true;
      break;
    }
    const MatrixXd jac = jacobian_from(e, v);
    const MatrixXd jtj = jac.transpose() * jac;
    const VectorXd jtr = jac.transpose() * r;
    bool accepted = false;
    while (!accepted) {
      const MatrixXd lhs = jtj + lambda * MatrixXd::Identity(jtj.rows(), jtj.cols());
      const VectorXd step = -lhs.ldlt().solve(jtr);
      if (step.norm() <= 1e-12 * (1.0 + v.pack().norm())) {
        out.iterations = it + 1;
        out.vars = v;
        out.residual_inf = r.cwiseAbs().maxCoeff();
        out.converged = out.residual_inf <= opts.tol;
        return out;
      }
      const ContactVariables trial = ContactVariables::unpack(v.pack() + step, d);
      try {
        PairEval et = eval_pair(bi, pi, bj, pj, trial, true, opts.grad_eps);
        const VectorXd rt = residual_from(et, trial).stacked();
        const double ct = rt.squaredNorm();
        if (std::isfinite(ct) && ct < cost) {
          v = trial;
          e = std::move(et);
          r = rt;
          cost = ct;
          lambda = std::max(lambda / 10.0, 1e-15);
          accepted = true;
          continue;
        }
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::DegenerateGradient) throw;
      }
      lambda *= 10.0;
      if (lambda > 1e16) {
        out.vars = v;
        out.residual_inf = r.cwiseAbs().maxCoeff();
        out.converged = out.residual_inf <= opts.tol;
        out.iterations = it + 1;
        return out;
      }
    }
    out.iterations = it + 1;
  }
  out.vars = v;
  out.residual_inf = r.cwiseAbs().maxCoeff();
  out.converged = out.converged || out.residual_inf <= opts.tol;
  return out;
}

}  // namespace detail

namespace detail {

// Deterministic, roughly uniform directions: equal angles in 2D, a
// Fibonacci lattice in 3D.
inline std::vector<VectorXd> spread_directions(int dim, int count) {
  std::vector<VectorXd> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    VectorXd d(dim);
    if (dim == 2) {
      const double t = 2.0 * std::numbers::pi * k / count;
      d << std::cos(t), std::sin(t);
    } else {
      const double z = 1.0 - 2.0 * (k + 0.5) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      d << r * std::cos(golden * k), r * std::sin(golden * k), z;
    }
    dirs.push_back(d);
  }
  return dirs;
}

inline std::optional<Body> with_rho(const Body& b, int rho) {
  const auto* sq = std::get_if<SuperquadBody>(&b);
  if (sq == nullptr) return b;
  try {
    return Body(SuperquadBody(sq->polytope(), std::min(rho, sq->rho()), sq->ybar(), sq->center()));
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline int rho_of(const Body& b) {
  const auto* sq = std::get_if<SuperquadBody>(&b);
  return sq == nullptr ? 1 : sq->rho();
}

}  // namespace detail

/// Solves the MOTT conditions for a fixed pair of poses with damped
/// Gauss-Newton, starting from the center-ray initialization.
///
/// Fallbacks, tried in order when a start fails to converge or lands on the
/// maximum-offset branch (negative uniqueness margin):
///  1. continuation in rho (solve rounder approximations first, warm start);
///  2. multi-start from rays along fixed spread directions, keeping the
///     admissible solution of smallest |phi|.
inline StaticMottSolution solve_static_mott(const Body& body_i, const Pose& pose_i, const Body& body_j,
                                            const Pose& pose_j, const StaticMottOptions& opts = {}) {
  require(body_dim(body_i) == body_dim(body_j), ErrorKind::DimensionMismatch, "bodies have different dimensions");
  const int dim = body_dim(body_i);
  StaticMottSolution sol;
  bool any_converged = false;

  // Returns true when the outcome is an admissible final answer.
  const auto accept = [&](const detail::LmOutcome& lm) {
    sol.iterations += lm.iterations;
    if (!lm.converged) return false;
    any_converged = true;
    const double margin = uniqueness_margin(body_i, pose_i, body_j, pose_j, lm.vars);
    if (opts.enforce_uniqueness && margin < 0.0) return false;
    sol.vars = lm.vars;
    sol.residual_inf = lm.residual_inf;
    sol.uniqueness_margin = margin;
    return true;
  };
  const auto run = [&](const Body& bi, const Body& bj, ContactVariables start) {
    try {
      return detail::levenberg_marquardt(bi, pose_i, bj, pose_j, std::move(start), opts, opts.lambda_init);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::DegenerateGradient) throw;
      return detail::LmOutcome{};
    }
  };

  const ContactVariables init = center_ray_initialization(body_i, pose_i, body_j, pose_j);
  if (accept(run(body_i, body_j, init))) return sol;
  sol.restarted = true;

  const int top = std::max(detail::rho_of(body_i), detail::rho_of(body_j));
  if (top > 1) {
    std::optional<ContactVariables> warm;
    for (int rho = 1; rho < top; ++rho) {
      const auto si = detail::with_rho(body_i, rho);
      const auto sj = detail::with_rho(body_j, rho);
      if (!si || !sj) continue;
      const auto step = run(*si, *sj, warm ? *warm : center_ray_initialization(*si, pose_i, *sj, pose_j));
      sol.iterations += step.iterations;
      if (step.converged && uniqueness_margin(*si, pose_i, *sj, pose_j, step.vars) >= 0.0) warm = step.vars;
    }
    if (warm && accept(run(body_i, body_j, *warm))) return sol;
  }

  const VectorXd ci = pose_i.to_world(body_center(body_i));
  const VectorXd cj = pose_j.to_world(body_center(body_j));
  std::optional<StaticMottSolution> best;
  for (const VectorXd& d : detail::spread_directions(dim, dim == 2 ? 12 : 24)) {
    ContactVariables start;
    start.x_i = ray_boundary(body_i, pose_i, ci, d, 2.0 * bounding_radius(body_i) + 1e-3);
    start.x_j = ray_boundary(body_j, pose_j, cj, -d, 2.0 * bounding_radius(body_j) + 1e-3);
    start.a = d;
    start.phi = d.dot(start.x_j - start.x_i);
    if (accept(run(body_i, body_j, start)) && (!best || std::abs(sol.vars.phi) < std::abs(best->vars.phi)))
      best = sol;
  }
  if (best) {
    best->iterations = sol.iterations;
    best->restarted = true;
    return *best;
  }
  if (any_converged)
    throw Error(ErrorKind::UniquenessViolation, "every start converged to a maximum-offset solution");
  throw Error(ErrorKind::MaxIterations, "static MOTT did not converge from any start");
}

}  // namespace mott
