#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mott/mott.hpp"
#include "mott/nlp.hpp"
#include "mott/oracle.hpp"
#include "mott/scene.hpp"

namespace mott {

/// Solver-ready trajectory problem. Configurations stack the poses
/// [translation; rotation] of mobile bodies in scene order.
struct TrajOptSpec {
  int dim = 3;
  std::vector<std::string> names;
  std::vector<Body> bodies;
  /// Poses of every body at rest; mobile entries are overridden by q.
  std::vector<Pose> rest_poses;
  /// Slot of each body in q, or -1 for static bodies.
  std::vector<int> slot;
  std::vector<std::pair<int, int>> pairs;
  int horizon = 2;
  VectorXd q_init;
  VectorXd q_goal;
  VectorXd v_max;
  /// Diagonal of the goal weight matrix.
  VectorXd goal_weight;
  bool fix_final = false;
  double phi_margin = 0.0;
  /// Adds (c_j - c_i) . grad g_i(x_i) >= 0 rows per knot and pair.
  bool enforce_uniqueness = false;

  int pose_dim() const { return pose_size(dim); }
  int n_mobile() const {
    return static_cast<int>(std::count_if(slot.begin(), slot.end(), [](int s) { return s >= 0; }));
  }
  int q_size() const { return n_mobile() * pose_dim(); }
  int n_pairs() const { return static_cast<int>(pairs.size()); }

  Pose pose_of(int body, const VectorXd& q) const {
    const int s = slot[static_cast<std::size_t>(body)];
    if (s < 0) return rest_poses[static_cast<std::size_t>(body)];
    return Pose::from_params(q.segment(s * pose_dim(), pose_dim()));
  }

  std::string pair_name(int p) const {
    const auto& [i, j] = pairs[static_cast<std::size_t>(p)];
    return names[static_cast<std::size_t>(i)] + "/" + names[static_cast<std::size_t>(j)];
  }

  void validate() const {
    require(dim == 2 || dim == 3, ErrorKind::DimensionMismatch, "dimension must be 2 or 3");
    require(bodies.size() == slot.size() && bodies.size() == rest_poses.size() && bodies.size() == names.size(),
            ErrorKind::DimensionMismatch, "per-body arrays differ in length");
    for (const auto& b : bodies)
      require(body_dim(b) == dim, ErrorKind::DimensionMismatch, "body dimension differs from scene");
    const int nq = q_size();
    require(horizon >= (nq > 0 ? 2 : 1), ErrorKind::InvalidArgument,
            "horizon must be >= 2 (>= 1 without mobile bodies)");
    require(q_init.size() == nq && q_goal.size() == nq, ErrorKind::DimensionMismatch,
            "q_init and q_goal must have " + std::to_string(nq) + " entries");
    require(v_max.size() == nq && goal_weight.size() == nq, ErrorKind::DimensionMismatch,
            "v_max and goal_weight must have one entry per configuration coordinate");
    require((v_max.array() > 0.0).all(), ErrorKind::InvalidArgument, "v_max must be positive");
    require((goal_weight.array() >= 0.0).all(), ErrorKind::InvalidArgument, "goal weights must be non-negative");
    for (const auto& [i, j] : pairs)
      require(i >= 0 && j >= 0 && i < static_cast<int>(bodies.size()) && j < static_cast<int>(bodies.size()) &&
                  i != j,
              ErrorKind::InvalidArgument, "pair indices out of range");
  }

  /// Builds bodies from the scene; polytopes must already be approximated.
  static TrajOptSpec from_scene(const Scene& scene) {
    validate_scene(scene);
    TrajOptSpec s;
    s.dim = scene.dim;
    int next = 0;
    for (const auto& b : scene.bodies) {
      s.names.push_back(b.name);
      s.bodies.push_back(make_body(b));
      s.rest_poses.push_back(b.initial_pose);
      s.slot.push_back(b.mobile ? next++ : -1);
    }
    s.pairs = resolve_pairs(scene);
    s.horizon = scene.horizon;
    const int pd = s.pose_dim();
    s.q_init.resize(next * pd);
    s.q_goal.resize(next * pd);
    for (const auto& b : scene.bodies) {
      if (!b.mobile) continue;
      require(b.goal_pose.has_value(), ErrorKind::SchemaError, "mobile body '" + b.name + "' has no goal pose");
      const int k = s.slot[static_cast<std::size_t>(scene.find(b.name))];
      s.q_init.segment(k * pd, pd) = b.initial_pose.params();
      s.q_goal.segment(k * pd, pd) = b.goal_pose->params();
    }
    const int nq = s.q_size();
    if (scene.v_max.size() == 1)
      s.v_max = VectorXd::Constant(nq, scene.v_max[0]);
    else
      s.v_max = scene.v_max;
    s.goal_weight = VectorXd::Constant(nq, scene.goal_weight);
    s.fix_final = scene.fix_final;
    s.phi_margin = scene.phi_margin;
    if (nq == 0) s.v_max = s.goal_weight = VectorXd(0);
    s.validate();
    return s;
  }
};

struct IndexRange {
  int start = 0;
  int size = 0;
};

/// Decision vector: all knots q^0..q^{T-1}, then one contact block per
/// (t, pair) in row-major (t outer) order.
struct DecisionLayout {
  int horizon = 0;
  int q_size = 0;
  int n_pairs = 0;
  int dim = 3;

  explicit DecisionLayout(const TrajOptSpec& s)
      : horizon(s.horizon), q_size(s.q_size()), n_pairs(s.n_pairs()), dim(s.dim) {}
  DecisionLayout(int t, int nq, int np, int d) : horizon(t), q_size(nq), n_pairs(np), dim(d) {}

  int block_size() const { return ContactVariables::size(dim); }
  IndexRange knot(int t) const { return {t * q_size, q_size}; }
  IndexRange contact(int t, int p) const {
    return {horizon * q_size + (t * n_pairs + p) * block_size(), block_size()};
  }
  int total() const { return horizon * q_size + horizon * n_pairs * block_size(); }

  VectorXd q(const VectorXd& x, int t) const { return x.segment(knot(t).start, q_size); }
  ContactVariables contact_vars(const VectorXd& x, int t, int p) const {
    const auto r = contact(t, p);
    return ContactVariables::unpack(x.segment(r.start, r.size), dim);
  }
};

/// Row bookkeeping of build_problem.
struct ConstraintCounts {
  int endpoint_rows = 0;
  int mott_rows = 0;
  int phi_rows = 0;
  int uniqueness_rows = 0;
  int velocity_rows = 0;

  int n_eq() const { return endpoint_rows + mott_rows; }
  int n_ineq() const { return phi_rows + uniqueness_rows + velocity_rows; }
};

inline ConstraintCounts constraint_counts(const TrajOptSpec& s) {
  ConstraintCounts c;
  const int tp = s.horizon * s.n_pairs();
  c.endpoint_rows = s.q_size() * (s.fix_final ? 2 : 1);
  c.mott_rows = tp * MottResidual::size(s.dim);
  c.phi_rows = tp;
  c.uniqueness_rows = s.enforce_uniqueness ? tp : 0;
  c.velocity_rows = 2 * (s.horizon - 1) * s.q_size();
  return c;
}

namespace detail {

inline void add_block(std::vector<Triplet>& trips, int row0, int col0, const MatrixXd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      if (m(r, c) != 0.0) trips.emplace_back(row0 + static_cast<int>(r), col0 + static_cast<int>(c), m(r, c));
}

// d(R c + t)/d(pose params) for a body-frame point c.
inline MatrixXd point_pose_jacobian(const Pose& pose, const VectorXd& c) {
  const int d = pose.dim();
  MatrixXd out(d, pose.n_params());
  out.leftCols(d).setIdentity();
  const auto dr = rotation_derivatives(pose.rotation);
  for (std::size_t k = 0; k < dr.size(); ++k) out.col(d + static_cast<Eigen::Index>(k)) = dr[k] * c;
  return out;
}

inline double goal_objective(const TrajOptSpec& s, const std::vector<VectorXd>& knots) {
  double f = 0.0;
  for (const auto& q : knots) f += (q - s.q_goal).cwiseProduct(s.goal_weight).dot(q - s.q_goal);
  return f;
}

// Objective, endpoint and velocity rows shared by both formulations. Knots
// occupy the first T * q_size entries of x.
struct KnotTerms {
  const TrajOptSpec& s;

  double objective(const VectorXd& x, VectorXd* grad) const {
    const int nq = s.q_size();
    double f = 0.0;
    if (grad) grad->setZero(x.size());
    for (int t = 0; t < s.horizon; ++t) {
      const VectorXd e = x.segment(t * nq, nq) - s.q_goal;
      f += e.cwiseProduct(s.goal_weight).dot(e);
      if (grad) grad->segment(t * nq, nq) = 2.0 * s.goal_weight.cwiseProduct(e);
    }
    return f;
  }

  SparseMatrix hessian(int n_vars) const {
    const int nq = s.q_size();
    std::vector<Triplet> trips;
    for (int t = 0; t < s.horizon; ++t)
      for (int k = 0; k < nq; ++k) trips.emplace_back(t * nq + k, t * nq + k, 2.0 * s.goal_weight[k]);
    SparseMatrix h(n_vars, n_vars);
    h.setFromTriplets(trips.begin(), trips.end());
    return h;
  }

  int endpoint(const VectorXd& x, VectorXd& c, std::vector<Triplet>* trips, int row) const {
    const int nq = s.q_size();
    const int last = (s.horizon - 1) * nq;
    for (int k = 0; k < nq; ++k, ++row) {
      c[row] = x[k] - s.q_init[k];
      if (trips) trips->emplace_back(row, k, 1.0);
    }
    if (s.fix_final)
      for (int k = 0; k < nq; ++k, ++row) {
        c[row] = x[last + k] - s.q_goal[k];
        if (trips) trips->emplace_back(row, last + k, 1.0);
      }
    return row;
  }

  // v_max - dq >= 0 and v_max + dq >= 0.
  int velocity(const VectorXd& x, VectorXd& c, std::vector<Triplet>* trips, int row) const {
    const int nq = s.q_size();
    for (int t = 0; t + 1 < s.horizon; ++t)
      for (int k = 0; k < nq; ++k) {
        const int a = t * nq + k, b = (t + 1) * nq + k;
        const double dq = x[b] - x[a];
        c[row] = s.v_max[k] - dq;
        c[row + 1] = s.v_max[k] + dq;
        if (trips) {
          trips->emplace_back(row, b, -1.0);
          trips->emplace_back(row, a, 1.0);
          trips->emplace_back(row + 1, b, 1.0);
          trips->emplace_back(row + 1, a, -1.0);
        }
        row += 2;
      }
    return row;
  }
};

inline void fill(SparseMatrix* jac, int rows, int cols, std::vector<Triplet>& trips) {
  if (!jac) return;
  jac->resize(rows, cols);
  jac->setFromTriplets(trips.begin(), trips.end());
}

inline std::vector<int> iota_rows(int begin, int end) {
  std::vector<int> out;
  for (int r = begin; r < end; ++r) out.push_back(r);
  return out;
}

}  // namespace detail

/// Direct transcription with one MOTT block per knot and pair.
///
/// Equalities: q^0 = q_init (and q^{T-1} = q_goal when fix_final), then the
/// MOTT residual rows of every (t, pair). Inequalities: phi - margin >= 0 per
/// (t, pair), optional uniqueness rows, then the velocity box rows.
inline NlpProblem build_problem(const TrajOptSpec& spec) {
  spec.validate();
  const DecisionLayout layout(spec);
  const ConstraintCounts counts = constraint_counts(spec);
  const int n = layout.total();
  const int d = spec.dim;
  const int rows_per_block = MottResidual::size(d);
  const detail::KnotTerms terms{spec};

  NlpProblem prob;
  prob.n_vars = n;
  prob.objective = [terms](const VectorXd& x, VectorXd* grad) { return terms.objective(x, grad); };
  prob.objective_hessian = [terms, n](const VectorXd&) { return terms.hessian(n); };

  prob.n_eq = counts.n_eq();
  prob.eq_constraints = [spec, layout, terms, counts, rows_per_block](const VectorXd& x, VectorXd& c,
                                                                      SparseMatrix* jac) {
    c.resize(counts.n_eq());
    std::vector<Triplet> trips;
    std::vector<Triplet>* tp = jac ? &trips : nullptr;
    int row = terms.endpoint(x, c, tp, 0);
    for (int t = 0; t < spec.horizon; ++t) {
      const VectorXd q = layout.q(x, t);
      for (int p = 0; p < spec.n_pairs(); ++p, row += rows_per_block) {
        const auto [i, j] = spec.pairs[static_cast<std::size_t>(p)];
        const Body& bi = spec.bodies[static_cast<std::size_t>(i)];
        const Body& bj = spec.bodies[static_cast<std::size_t>(j)];
        const Pose pi = spec.pose_of(i, q), pj = spec.pose_of(j, q);
        const ContactVariables v = layout.contact_vars(x, t, p);
        const auto e = detail::eval_pair(bi, pi, bj, pj, v, jac != nullptr, kGradEps);
        // Boundary rows use the gauge of g: same zero set, no flat interior.
        const auto [hi, dhi] = gauge_from_g(bi, e.ei.g);
        const auto [hj, dhj] = gauge_from_g(bj, e.ej.g);
        c.segment(row, rows_per_block) = detail::residual_from(e, v).stacked();
        c[row] = hi;
        c[row + 1] = hj;
        if (!jac) continue;
        MatrixXd jv = detail::jacobian_from(e, v);
        jv.row(0) *= dhi;
        jv.row(1) *= dhj;
        detail::add_block(trips, row, layout.contact(t, p).start, jv);
        auto pose_jac = mott_pose_jacobians(bi, pi, bj, pj, v);
        pose_jac.wrt_pose_i.row(0) *= dhi;
        pose_jac.wrt_pose_j.row(1) *= dhj;
        const int si = spec.slot[static_cast<std::size_t>(i)], sj = spec.slot[static_cast<std::size_t>(j)];
        const int q0 = layout.knot(t).start;
        if (si >= 0) detail::add_block(trips, row, q0 + si * spec.pose_dim(), pose_jac.wrt_pose_i);
        if (sj >= 0) detail::add_block(trips, row, q0 + sj * spec.pose_dim(), pose_jac.wrt_pose_j);
      }
    }
    detail::fill(jac, counts.n_eq(), layout.total(), trips);
  };

  prob.n_ineq = counts.n_ineq();
  prob.ineq_constraints = [spec, layout, terms, counts](const VectorXd& x, VectorXd& c, SparseMatrix* jac) {
    c.resize(counts.n_ineq());
    std::vector<Triplet> trips;
    int row = 0;
    const int d = spec.dim;
    for (int t = 0; t < spec.horizon; ++t)
      for (int p = 0; p < spec.n_pairs(); ++p, ++row) {
        const int col = layout.contact(t, p).start + 2 * d;
        c[row] = x[col] - spec.phi_margin;
        if (jac) trips.emplace_back(row, col, 1.0);
      }
    if (spec.enforce_uniqueness) {
      for (int t = 0; t < spec.horizon; ++t) {
        const VectorXd q = layout.q(x, t);
        for (int p = 0; p < spec.n_pairs(); ++p, ++row) {
          const auto [i, j] = spec.pairs[static_cast<std::size_t>(p)];
          const Body& bi = spec.bodies[static_cast<std::size_t>(i)];
          const Body& bj = spec.bodies[static_cast<std::size_t>(j)];
          const Pose pi = spec.pose_of(i, q), pj = spec.pose_of(j, q);
          const ContactVariables v = layout.contact_vars(x, t, p);
          const VectorXd ci = pi.to_world(body_center(bi)), cj = pj.to_world(body_center(bj));
          const LocalEval e = evaluate(bi, v.x_i, pi, jac != nullptr);
          c[row] = (cj - ci).dot(e.grad);
          if (!jac) continue;
          const VectorXd u = cj - ci;
          detail::add_block(trips, row, layout.contact(t, p).start, (e.hess * u).transpose());
          const int si = spec.slot[static_cast<std::size_t>(i)], sj = spec.slot[static_cast<std::size_t>(j)];
          const int q0 = layout.knot(t).start;
          if (si >= 0) {
            const auto pjac = pose_jacobians(bi, v.x_i, pi);
            const MatrixXd dci = detail::point_pose_jacobian(pi, body_center(bi));
            detail::add_block(trips, row, q0 + si * spec.pose_dim(),
                              (pjac.dgrad_dq.transpose() * u - dci.transpose() * e.grad).transpose());
          }
          if (sj >= 0) {
            const MatrixXd dcj = detail::point_pose_jacobian(pj, body_center(bj));
            detail::add_block(trips, row, q0 + sj * spec.pose_dim(), (dcj.transpose() * e.grad).transpose());
          }
        }
      }
    }
    row = terms.velocity(x, c, jac ? &trips : nullptr, row);
    detail::fill(jac, counts.n_ineq(), layout.total(), trips);
  };

  prob.linear_eq_rows = detail::iota_rows(0, counts.endpoint_rows);
  prob.linear_ineq_rows = detail::iota_rows(0, counts.phi_rows);
  const auto vel = detail::iota_rows(counts.n_ineq() - counts.velocity_rows, counts.n_ineq());
  prob.linear_ineq_rows.insert(prob.linear_ineq_rows.end(), vel.begin(), vel.end());
  return prob;
}

/// Straight-line knots from q_init to q_goal (rotation vectors interpolated
/// componentwise).
inline std::vector<VectorXd> interpolate_knots(const TrajOptSpec& spec) {
  std::vector<VectorXd> knots;
  for (int t = 0; t < spec.horizon; ++t) {
    const double s = spec.horizon == 1 ? 0.0 : static_cast<double>(t) / (spec.horizon - 1);
    knots.push_back((1.0 - s) * spec.q_init + s * spec.q_goal);
  }
  return knots;
}

struct InitialGuess {
  VectorXd x;
  /// (t, pair) blocks that fell back to the center-ray values.
  std::vector<std::pair<int, int>> fallbacks;
};

/// Interpolated knots with contact blocks warm-started by the static solver.
inline InitialGuess initial_guess(const TrajOptSpec& spec, std::ostream* log = nullptr) {
  spec.validate();
  const DecisionLayout layout(spec);
  InitialGuess g{VectorXd::Zero(layout.total()), {}};
  const auto knots = interpolate_knots(spec);
  for (int t = 0; t < spec.horizon; ++t) {
    g.x.segment(layout.knot(t).start, layout.q_size) = knots[static_cast<std::size_t>(t)];
    for (int p = 0; p < spec.n_pairs(); ++p) {
      const auto [i, j] = spec.pairs[static_cast<std::size_t>(p)];
      const Body& bi = spec.bodies[static_cast<std::size_t>(i)];
      const Body& bj = spec.bodies[static_cast<std::size_t>(j)];
      const Pose pi = spec.pose_of(i, knots[static_cast<std::size_t>(t)]);
      const Pose pj = spec.pose_of(j, knots[static_cast<std::size_t>(t)]);
      ContactVariables v;
      try {
        v = solve_static_mott(bi, pi, bj, pj).vars;
      } catch (const Error& err) {
        if (log) *log << "warm start failed at knot " << t << " pair " << spec.pair_name(p) << ": " << err.what() << "\n";
        v = center_ray_initialization(bi, pi, bj, pj);
        g.fallbacks.emplace_back(t, p);
      }
      const auto r = layout.contact(t, p);
      g.x.segment(r.start, r.size) = v.pack();
    }
  }
  return g;
}

struct TrajectoryDiagnostics {
  NlpStatus status = NlpStatus::MaxIterations;
  KktReport kkt;
  int outer_iterations = 0;
  int inner_iterations = 0;
  /// Whole call including warm start.
  double wall_time_ms = 0.0;
  double solver_time_ms = 0.0;
  double objective = 0.0;
  /// Constraints violated beyond tol_feas at the returned point.
  std::vector<std::string> violations;
};

struct Trajectory {
  std::vector<VectorXd> knots;
  /// contacts[t][p]; empty for the bilevel formulation.
  std::vector<std::vector<ContactVariables>> contacts;
  TrajectoryDiagnostics diagnostics;
};

struct TrajectoryAudit {
  double max_mott_residual = 0.0;
  double min_phi = std::numeric_limits<double>::infinity();
  double endpoint_error = 0.0;
  double final_error = 0.0;
  double max_velocity_excess = 0.0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

/// Re-evaluates every trajectory constraint from scratch against `spec`.
inline TrajectoryAudit audit_trajectory(const TrajOptSpec& spec, const Trajectory& traj, double tol = 1e-6) {
  require(static_cast<int>(traj.knots.size()) == spec.horizon, ErrorKind::DimensionMismatch,
          "trajectory has " + std::to_string(traj.knots.size()) + " knots, expected " +
              std::to_string(spec.horizon));
  TrajectoryAudit a;
  const auto note = [&](const std::string& what, double value) {
    std::ostringstream os;
    os << what << " (" << value << ")";
    a.violations.push_back(os.str());
  };
  const int nq = spec.q_size();
  if (nq > 0) {
    a.endpoint_error = (traj.knots.front() - spec.q_init).cwiseAbs().maxCoeff();
    if (a.endpoint_error > tol) note("q^0 differs from q_init", a.endpoint_error);
    a.final_error = (traj.knots.back() - spec.q_goal).cwiseAbs().maxCoeff();
    if (spec.fix_final && a.final_error > tol) note("q^T-1 differs from q_goal", a.final_error);
  }
  for (int t = 0; t + 1 < spec.horizon; ++t) {
    const VectorXd dq = (traj.knots[static_cast<std::size_t>(t + 1)] - traj.knots[static_cast<std::size_t>(t)]);
    const double excess = nq > 0 ? (dq.cwiseAbs() - spec.v_max).maxCoeff() : 0.0;
    a.max_velocity_excess = std::max(a.max_velocity_excess, excess);
    if (excess > tol) note("velocity limit exceeded on interval " + std::to_string(t), excess);
  }
  if (traj.contacts.empty()) return a;
  for (int t = 0; t < spec.horizon; ++t)
    for (int p = 0; p < spec.n_pairs(); ++p) {
      const auto [i, j] = spec.pairs[static_cast<std::size_t>(p)];
      const VectorXd& q = traj.knots[static_cast<std::size_t>(t)];
      const auto& v = traj.contacts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
      const std::string where = "knot " + std::to_string(t) + " pair " + spec.pair_name(p);
      double res = std::numeric_limits<double>::infinity();
      try {
        res = mott_residual(spec.bodies[static_cast<std::size_t>(i)], spec.pose_of(i, q),
                            spec.bodies[static_cast<std::size_t>(j)], spec.pose_of(j, q), v)
                  .inf_norm();
      } catch (const Error&) {
      }
      a.max_mott_residual = std::max(a.max_mott_residual, res);
      if (!(res <= tol)) note("MOTT residual at " + where, res);
      a.min_phi = std::min(a.min_phi, v.phi);
      if (v.phi < -tol) note("negative phi at " + where, v.phi);
    }
  return a;
}

namespace detail {

inline Trajectory unpack_trajectory(const TrajOptSpec& spec, const VectorXd& x, bool with_contacts) {
  const DecisionLayout layout(spec);
  Trajectory traj;
  for (int t = 0; t < spec.horizon; ++t) {
    traj.knots.push_back(layout.q(x, t));
    if (!with_contacts) continue;
    std::vector<ContactVariables> row;
    for (int p = 0; p < spec.n_pairs(); ++p) row.push_back(layout.contact_vars(x, t, p));
    traj.contacts.push_back(std::move(row));
  }
  return traj;
}

// Endpoint and velocity rows are linear and held to this tolerance.
inline constexpr double kLinearFeasTol = 1e-9;

inline NlpOptions nlp_options(const SolverSettings& s, HessianMode mode, std::ostream* log) {
  NlpOptions o;
  o.tol_feas = s.tol_feas;
  o.tol_feas_linear = kLinearFeasTol;
  o.tol_opt = s.tol_opt;
  o.max_outer = s.max_iter;
  o.rho_init = s.rho_init;
  o.max_wall_ms = s.time_limit_ms;
  o.hessian = mode;
  o.log = log;
  return o;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Single-level solve: knots and contact blocks optimized jointly.
inline Trajectory solve_trajectory(const TrajOptSpec& spec, const SolverSettings& settings = {},
                                   std::ostream* log = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  const NlpProblem prob = build_problem(spec);
  const InitialGuess guess = initial_guess(spec, log);
  // Boundary rows are gauges with slope 1 / (2 rho) at the surface; tighten
  // so the raw MOTT residual meets tol_feas.
  int rho_max = 1;
  for (const auto& b : spec.bodies)
    if (const auto* sq = std::get_if<SuperquadBody>(&b)) rho_max = std::max(rho_max, sq->rho());
  NlpOptions opts = detail::nlp_options(settings, HessianMode::FiniteDifference, log);
  opts.tol_feas = settings.tol_feas / (2.0 * rho_max);
  const NlpSolution sol = solve_nlp(prob, guess.x, opts);
  Trajectory traj = detail::unpack_trajectory(spec, sol.x, true);
  auto& diag = traj.diagnostics;
  diag.status = sol.status;
  diag.kkt = sol.kkt;
  diag.outer_iterations = sol.outer_iterations;
  diag.inner_iterations = sol.inner_iterations;
  diag.solver_time_ms = sol.wall_time_ms;
  diag.objective = detail::goal_objective(spec, traj.knots);
  diag.violations = audit_trajectory(spec, traj, settings.tol_feas).violations;
  diag.wall_time_ms = detail::elapsed_ms(t0);
  return traj;
}

/// Bilevel baseline: only knots are decision variables. Each pair's signed
/// distance between the source polytopes is recomputed by the oracle at
/// every evaluation, with forward-difference gradients. Polytope bodies only.
inline Trajectory solve_trajectory_bilevel(const TrajOptSpec& spec, const SolverSettings& settings = {},
                                           std::ostream* log = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  spec.validate();
  std::vector<Polytope> polys;
  std::vector<VertexHull> local_hulls;
  for (std::size_t k = 0; k < spec.bodies.size(); ++k) {
    const auto* sq = std::get_if<SuperquadBody>(&spec.bodies[k]);
    require(sq != nullptr, ErrorKind::InvalidArgument,
            "bilevel baseline supports polytope bodies only ('" + spec.names[k] + "')");
    polys.push_back(sq->polytope());
    local_hulls.push_back(enumerate_vertices(sq->polytope(), Pose::identity(spec.dim)));
  }
  const auto posed = [&](int body, const Pose& pose) {
    VertexHull h = local_hulls[static_cast<std::size_t>(body)];
    h.points = (pose.rotation_matrix() * h.points).colwise() + pose.translation;
    return h;
  };
  const auto distance = [&](int i, const Pose& pi, int j, const Pose& pj) {
    return polytope_signed_distance(polys[static_cast<std::size_t>(i)], pi, posed(i, pi),
                                    polys[static_cast<std::size_t>(j)], pj, posed(j, pj));
  };

  const int nq = spec.q_size();
  const int np = spec.n_pairs();
  const int pd = spec.pose_dim();
  const int n = spec.horizon * nq;
  const int n_dist = spec.horizon * np;
  const int n_vel = 2 * (spec.horizon - 1) * nq;
  const detail::KnotTerms terms{spec};
  constexpr double kStep = 1e-7;

  NlpProblem prob;
  prob.n_vars = n;
  prob.objective = [terms](const VectorXd& x, VectorXd* grad) { return terms.objective(x, grad); };
  prob.objective_hessian = [terms, n](const VectorXd&) { return terms.hessian(n); };
  prob.n_eq = nq * (spec.fix_final ? 2 : 1);
  prob.eq_constraints = [terms, n, m = prob.n_eq](const VectorXd& x, VectorXd& c, SparseMatrix* jac) {
    c.resize(m);
    std::vector<Triplet> trips;
    terms.endpoint(x, c, jac ? &trips : nullptr, 0);
    detail::fill(jac, m, n, trips);
  };
  prob.n_ineq = n_dist + n_vel;
  prob.ineq_constraints = [&, terms, n, m = prob.n_ineq](const VectorXd& x, VectorXd& c, SparseMatrix* jac) {
    c.resize(m);
    std::vector<Triplet> trips;
    int row = 0;
    for (int t = 0; t < spec.horizon; ++t) {
      const VectorXd q = x.segment(t * nq, nq);
      for (int p = 0; p < np; ++p, ++row) {
        const auto [i, j] = spec.pairs[static_cast<std::size_t>(p)];
        const double d0 = distance(i, spec.pose_of(i, q), j, spec.pose_of(j, q));
        c[row] = d0 - spec.phi_margin;
        if (!jac) continue;
        for (int body : {i, j}) {
          const int s = spec.slot[static_cast<std::size_t>(body)];
          if (s < 0) continue;
          for (int k = 0; k < pd; ++k) {
            VectorXd qh = q;
            qh[s * pd + k] += kStep;
            const double dh = distance(i, spec.pose_of(i, qh), j, spec.pose_of(j, qh));
            trips.emplace_back(row, t * nq + s * pd + k, (dh - d0) / kStep);
          }
        }
      }
    }
    terms.velocity(x, c, jac ? &trips : nullptr, row);
    detail::fill(jac, m, n, trips);
  };
  prob.linear_eq_rows = detail::iota_rows(0, prob.n_eq);
  prob.linear_ineq_rows = detail::iota_rows(n_dist, n_dist + n_vel);

  VectorXd x0(n);
  const auto knots = interpolate_knots(spec);
  for (int t = 0; t < spec.horizon; ++t) x0.segment(t * nq, nq) = knots[static_cast<std::size_t>(t)];
  const NlpSolution sol = solve_nlp(prob, x0, detail::nlp_options(settings, HessianMode::Bfgs, log));
  Trajectory traj;
  for (int t = 0; t < spec.horizon; ++t) traj.knots.push_back(sol.x.segment(t * nq, nq));
  auto& diag = traj.diagnostics;
  diag.status = sol.status;
  diag.kkt = sol.kkt;
  diag.outer_iterations = sol.outer_iterations;
  diag.inner_iterations = sol.inner_iterations;
  diag.solver_time_ms = sol.wall_time_ms;
  diag.objective = detail::goal_objective(spec, traj.knots);
  diag.violations = audit_trajectory(spec, traj, settings.tol_feas).violations;
  diag.wall_time_ms = detail::elapsed_ms(t0);
  return traj;
}

/// Pose of every body at a fractional knot index s in [0, T - 1].
inline std::vector<Pose> poses_at(const TrajOptSpec& spec, const std::vector<VectorXd>& knots, double s) {
  const int last = static_cast<int>(knots.size()) - 1;
  const int t = std::clamp(static_cast<int>(std::floor(s)), 0, std::max(0, last - 1));
  const double w = last == 0 ? 0.0 : s - t;
  const VectorXd q = last == 0 ? knots[0]
                               : VectorXd((1.0 - w) * knots[static_cast<std::size_t>(t)] +
                                          w * knots[static_cast<std::size_t>(t + 1)]);
  std::vector<Pose> out;
  for (int b = 0; b < static_cast<int>(spec.bodies.size()); ++b) out.push_back(spec.pose_of(b, q));
  return out;
}

struct PairValidation {
  std::string pair;
  /// Smallest static MOTT offset over the upsampled poses.
  double min_phi = std::numeric_limits<double>::infinity();
  /// Smallest signed distance between source polytopes (polytope pairs only).
  std::optional<double> min_polytope_distance;
  /// Sample times (in knot units) where sampling found an overlap.
  std::vector<double> overlapping_at;
  /// Sample times with |phi| < flag_margin.
  std::vector<double> flagged_at;
};

struct TrajectoryValidation {
  std::vector<PairValidation> pairs;
  std::vector<std::string> failures;

  bool pass() const { return failures.empty(); }
};

struct ValidationOptions {
  int upsample = 10;
  int n_samples = 10000;
  std::uint64_t seed = 0;
  double flag_margin = 1e-3;
};

/// Oracle audit of knots and `upsample - 1` interpolated poses per interval.
inline TrajectoryValidation validate_trajectory(const TrajOptSpec& spec, const std::vector<VectorXd>& knots,
                                                const ValidationOptions& opts = {}) {
  require(!knots.empty(), ErrorKind::SchemaError, "trajectory is empty");
  require(static_cast<int>(knots.size()) == spec.horizon, ErrorKind::SchemaError,
          "trajectory has " + std::to_string(knots.size()) + " knots, scene horizon is " +
              std::to_string(spec.horizon));
  for (const auto& q : knots)
    require(q.size() == spec.q_size(), ErrorKind::SchemaError, "knot has wrong configuration size");
  require(opts.upsample >= 1, ErrorKind::InvalidArgument, "upsample must be >= 1");

  std::vector<std::optional<VertexHull>> hulls;
  for (const auto& b : spec.bodies) {
    const auto* sq = std::get_if<SuperquadBody>(&b);
    hulls.push_back(sq ? std::optional(enumerate_vertices(sq->polytope(), Pose::identity(spec.dim)))
                       : std::nullopt);
  }

  TrajectoryValidation out;
  const int steps = (spec.horizon - 1) * opts.upsample;
  for (int p = 0; p < spec.n_pairs(); ++p) {
    const auto [i, j] = spec.pairs[static_cast<std::size_t>(p)];
    const Body& bi = spec.bodies[static_cast<std::size_t>(i)];
    const Body& bj = spec.bodies[static_cast<std::size_t>(j)];
    PairValidation pv;
    pv.pair = spec.pair_name(p);
    for (int k = 0; k <= steps; ++k) {
      const double s = static_cast<double>(k) / opts.upsample;
      const auto poses = poses_at(spec, knots, s);
      const Pose& pi = poses[static_cast<std::size_t>(i)];
      const Pose& pj = poses[static_cast<std::size_t>(j)];
      const std::uint64_t seed = opts.seed + static_cast<std::uint64_t>(p) * 1000003ULL + static_cast<std::uint64_t>(k);
      const bool overlap = sampled_penetration(bi, pi, bj, pj, opts.n_samples, seed).overlapping ||
                           sampled_penetration(bj, pj, bi, pi, opts.n_samples, seed + 1).overlapping;
      if (overlap) {
        pv.overlapping_at.push_back(s);
        std::ostringstream os;
        os << "pair " << pv.pair << " overlaps at t=" << s;
        if (k % opts.upsample == 0) os << " (knot " << k / opts.upsample << ")";
        out.failures.push_back(os.str());
      }
      try {
        const double phi = solve_static_mott(bi, pi, bj, pj).vars.phi;
        pv.min_phi = std::min(pv.min_phi, phi);
        if (std::abs(phi) < opts.flag_margin) pv.flagged_at.push_back(s);
      } catch (const Error&) {
      }
      const auto& hi = hulls[static_cast<std::size_t>(i)];
      const auto& hj = hulls[static_cast<std::size_t>(j)];
      if (hi && hj) {
        VertexHull wi = *hi, wj = *hj;
        wi.points = (pi.rotation_matrix() * wi.points).colwise() + pi.translation;
        wj.points = (pj.rotation_matrix() * wj.points).colwise() + pj.translation;
        const double dist = polytope_signed_distance(std::get<SuperquadBody>(bi).polytope(), pi, wi,
                                                     std::get<SuperquadBody>(bj).polytope(), pj, wj);
        pv.min_polytope_distance = std::min(pv.min_polytope_distance.value_or(dist), dist);
      }
    }
    out.pairs.push_back(std::move(pv));
  }
  return out;
}

}  // namespace mott
