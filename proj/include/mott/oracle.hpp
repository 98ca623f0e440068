#pragma once

// Ground-truth machinery used by tests, the distance sweep, validation and
// the bilevel baseline. Nothing here depends on the MOTT solver; the only
// shared code is body evaluation (eval_g).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "mott/bodies.hpp"

namespace mott {

/// Vertices of a posed polytope in world frame, one per column. `active`
/// lists, per vertex, the facet indices tight at it.
struct VertexHull {
  MatrixXd points;
  std::vector<std::vector<int>> active;

  int dim() const { return static_cast<int>(points.rows()); }
  int size() const { return static_cast<int>(points.cols()); }
  VectorXd vertex(int k) const { return points.col(k); }
};

namespace detail {
inline void for_each_subset(int n, int k, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}
}  // namespace detail

/// Intersects every N_x-subset of facets, keeps feasible points and merges
/// duplicates closer than 1e-8.
inline VertexHull enumerate_vertices(const Polytope& p, const Pose& pose) {
  require(pose.dim() == p.dim(), ErrorKind::DimensionMismatch, "pose dimension mismatch");
  const int nx = p.dim();
  const MatrixXd& a = p.facets();
  const VectorXd& b = p.offsets();
  std::vector<VectorXd> verts;
  detail::for_each_subset(p.n_facets(), nx, [&](const std::vector<int>& rows) {
    MatrixXd m(nx, nx);
    VectorXd rhs(nx);
    for (int i = 0; i < nx; ++i) {
      m.row(i) = a.row(rows[i]) / a.row(rows[i]).norm();
      rhs[i] = b[rows[i]] / a.row(rows[i]).norm();
    }
    Eigen::FullPivLU<MatrixXd> lu(m);
    if (lu.rank() < nx || std::abs(lu.determinant()) < 1e-12) return;
    const VectorXd x = lu.solve(rhs);
    if (!((a * x - b).array() <= 1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff())).all()) return;
    for (const auto& v : verts)
      if ((v - x).norm() <= 1e-8) return;
    verts.push_back(x);
  });
  require(!verts.empty(), ErrorKind::DegenerateFacetSet, "no vertex found");

  VertexHull hull;
  hull.points.resize(nx, static_cast<Eigen::Index>(verts.size()));
  const MatrixXd r = pose.rotation_matrix();
  for (std::size_t k = 0; k < verts.size(); ++k) {
    hull.points.col(static_cast<Eigen::Index>(k)) = r * verts[k] + pose.translation;
    std::vector<int> act;
    const VectorXd slack = b - a * verts[k];
    for (int f = 0; f < p.n_facets(); ++f)
      if (std::abs(slack[f]) <= 1e-7 * a.row(f).norm()) act.push_back(f);
    hull.active.push_back(std::move(act));
  }
  return hull;
}

struct ClosestPoints {
  double distance = 0.0;
  VectorXd p_i;
  VectorXd p_j;
  int iterations = 0;
  /// Final Frank-Wolfe duality gap on 0.5 |p_j - p_i|^2; the true squared
  /// distance is at least distance^2 - 2 gap.
  double gap = 0.0;
  bool converged = false;
};

namespace detail {

// Minimizer of |sum_k v_k p_k| subject to sum_k v_k = 1 over the columns of
// `pts`; least-squares on the bordered normal equations.
inline VectorXd affine_minimizer(const MatrixXd& pts) {
  const int m = static_cast<int>(pts.cols());
  MatrixXd k(m + 1, m + 1);
  k.topLeftCorner(m, m) = pts.transpose() * pts;
  k.topRightCorner(m, 1).setOnes();
  k.bottomLeftCorner(1, m).setOnes();
  k(m, m) = 0.0;
  VectorXd rhs = VectorXd::Zero(m + 1);
  rhs[m] = 1.0;
  return k.completeOrthogonalDecomposition().solve(rhs).head(m);
}

}  // namespace detail

/// Minimizes 0.5 |p_j - p_i|^2 over the two convex hulls on the
/// Minkowski-difference point set: Frank-Wolfe vertex selection with a fully
/// corrective step (exact minimization over the active set, Wolfe's
/// min-norm-point scheme). Terminates finitely; `gap` is the final
/// Frank-Wolfe duality gap.
inline ClosestPoints closest_points(const VertexHull& h_i, const VertexHull& h_j, double tol = 1e-10,
                                    int max_iterations = 10000) {
  require(h_i.size() > 0 && h_j.size() > 0, ErrorKind::InvalidArgument, "hulls must be nonempty");
  require(h_i.dim() == h_j.dim(), ErrorKind::DimensionMismatch, "hull dimensions differ");
  const int ni = h_i.size(), nj = h_j.size();
  const int n = ni * nj;
  MatrixXd diff(h_i.dim(), n);
  for (int p = 0; p < ni; ++p)
    for (int q = 0; q < nj; ++q) diff.col(p * nj + q) = h_j.points.col(q) - h_i.points.col(p);

  int start = 0;
  diff.colwise().squaredNorm().minCoeff(&start);
  std::vector<int> active{start};
  VectorXd w = VectorXd::Ones(1);
  VectorXd z = diff.col(start);

  const auto columns = [&](const std::vector<int>& idx) {
    MatrixXd m(diff.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = diff.col(idx[k]);
    return m;
  };

  ClosestPoints out;
  int it = 0;
  for (; it < max_iterations; ++it) {
    const VectorXd proj = diff.transpose() * z;
    int s = 0;
    proj.minCoeff(&s);
    out.gap = z.squaredNorm() - proj[s];
    if (out.gap <= tol || std::find(active.begin(), active.end(), s) != active.end()) {
      out.converged = out.gap <= tol || out.gap <= 1e-12 * std::max(1.0, z.squaredNorm());
      break;
    }
    active.push_back(s);
    w.conservativeResize(w.size() + 1);
    w[w.size() - 1] = 0.0;
    // Minor cycles: move toward the affine minimizer until it lies in the
    // relative interior of the active simplex.
    for (int minor = 0; minor <= h_i.dim() + 2; ++minor) {
      const VectorXd v = detail::affine_minimizer(columns(active));
      if ((v.array() > 1e-14).all()) {
        w = v;
        break;
      }
      double theta = 1.0;
      for (Eigen::Index k = 0; k < v.size(); ++k)
        if (v[k] <= 1e-14) theta = std::min(theta, w[k] / (w[k] - v[k]));
      w += theta * (v - w);
      std::vector<int> kept;
      std::vector<double> kept_w;
      for (Eigen::Index k = 0; k < w.size(); ++k)
        if (w[k] > 1e-14) {
          kept.push_back(active[static_cast<std::size_t>(k)]);
          kept_w.push_back(w[k]);
        }
      active = kept;
      w = Eigen::Map<VectorXd>(kept_w.data(), static_cast<Eigen::Index>(kept_w.size()));
    }
    w /= w.sum();
    z = columns(active) * w;
  }
  out.iterations = it;

  out.p_i = VectorXd::Zero(h_i.dim());
  out.p_j = VectorXd::Zero(h_i.dim());
  for (std::size_t k = 0; k < active.size(); ++k) {
    out.p_i += w[static_cast<Eigen::Index>(k)] * h_i.points.col(active[k] / nj);
    out.p_j += w[static_cast<Eigen::Index>(k)] * h_j.points.col(active[k] % nj);
  }
  out.distance = (out.p_j - out.p_i).norm();
  return out;
}

/// Signed distance between two posed polytopes: closest-points distance when
/// some separating-axis candidate (facet normals and, in 3D, edge-edge cross
/// products) separates them, otherwise minus the minimum overlap.
inline double polytope_signed_distance(const Polytope& p_i, const Pose& pose_i, const VertexHull& h_i,
                                       const Polytope& p_j, const Pose& pose_j, const VertexHull& h_j,
                                       double tol = 1e-10) {
  std::vector<VectorXd> axes;
  const MatrixXd ri = pose_i.rotation_matrix(), rj = pose_j.rotation_matrix();
  for (int k = 0; k < p_i.n_facets(); ++k) axes.push_back((ri * p_i.facets().row(k).transpose()).normalized());
  for (int k = 0; k < p_j.n_facets(); ++k) axes.push_back((rj * p_j.facets().row(k).transpose()).normalized());
  if (p_i.dim() == 3) {
    const auto edges = [](const VertexHull& h) {
      std::vector<Eigen::Vector3d> dirs;
      for (int a = 0; a < h.size(); ++a)
        for (int b = a + 1; b < h.size(); ++b) {
          int shared = 0;
          for (int f : h.active[a])
            shared += static_cast<int>(std::count(h.active[b].begin(), h.active[b].end(), f));
          if (shared >= 2) dirs.push_back((h.points.col(b) - h.points.col(a)).normalized());
        }
      return dirs;
    };
    for (const auto& ei : edges(h_i))
      for (const auto& ej : edges(h_j)) {
        const Eigen::Vector3d c = ei.cross(ej);
        if (c.norm() > 1e-9) axes.push_back(VectorXd(c.normalized()));
      }
  }
  double depth = std::numeric_limits<double>::infinity();
  for (const auto& n : axes) {
    const VectorXd pi = h_i.points.transpose() * n;
    const VectorXd pj = h_j.points.transpose() * n;
    const double overlap = std::min(pi.maxCoeff() - pj.minCoeff(), pj.maxCoeff() - pi.minCoeff());
    depth = std::min(depth, overlap);
  }
  // The candidate axes are complete for polytopes: no separating axis means
  // the hulls intersect.
  if (depth >= 0.0) return -depth;
  return closest_points(h_i, h_j, tol).distance;
}

struct BruteForceMott {
  double phi = 0.0;
  VectorXd a;
};

namespace detail {

inline std::vector<VectorXd> grid_directions(int dim, int count) {
  std::vector<VectorXd> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    VectorXd d(dim);
    if (dim == 2) {
      const double t = 2.0 * std::numbers::pi * k / count;
      d << std::cos(t), std::sin(t);
    } else {
      const double zc = 1.0 - 2.0 * (k + 0.5) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - zc * zc));
      d << r * std::cos(golden * k), r * std::sin(golden * k), zc;
    }
    dirs.push_back(d);
  }
  return dirs;
}

// Orthonormal basis of the complement of unit vector u (columns).
inline MatrixXd tangent_basis(const VectorXd& u) {
  const int dim = static_cast<int>(u.size());
  const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(u).householderQ();
  return q.rightCols(dim - 1);
}

// Star-shaped boundary parameterisation from an interior point, by bisection
// on the sign of g. Works in body frame with the rotation cached.
class RayBoundary {
 public:
  RayBoundary(const Body& body, const Pose& pose, double tol)
      : body_(body), rot_(pose.rotation_matrix()), trans_(pose.translation), tol_(tol),
        center_(body_center(body)), origin_(pose.to_world(center_)),
        reach_(2.0 * (bounding_radius(body) + center_.norm()) + 1.0) {}

  VectorXd point(const VectorXd& dir) const {
    const VectorXd db = rot_.transpose() * dir;
    VectorXd xb(db.size());
    const auto inside = [&](double t) {
      xb.noalias() = center_ + t * db;
      return std::visit([&](const auto& b) { return b.g_local(xb); }, body_) <= 0.0;
    };
    double lo = 0.0, hi = reach_;
    if (inside(hi)) throw Error(ErrorKind::NoContactInRange, "bisection bracket exhausted");
    while (hi - lo > tol_) {
      const double mid = 0.5 * (lo + hi);
      (inside(mid) ? lo : hi) = mid;
    }
    return origin_ + 0.5 * (lo + hi) * dir;
  }

  /// Locally refined max of n . p over boundary points, pattern search on
  /// the ray direction starting at `seed_dir`.
  double refined_support(const VectorXd& n, VectorXd seed_dir, double step, double min_step = 1e-8) const {
    const int dim = static_cast<int>(n.size());
    double best = n.dot(point(seed_dir));
    while (step > min_step) {
      const MatrixXd basis = tangent_basis(seed_dir);
      bool improved = false;
      for (int c = 0; c < dim - 1; ++c)
        for (double sign : {1.0, -1.0}) {
          const VectorXd cand = (seed_dir + sign * step * basis.col(c)).normalized();
          const double val = n.dot(point(cand));
          if (val > best) {
            best = val;
            seed_dir = cand;
            improved = true;
          }
        }
      if (!improved) step *= 0.5;
    }
    return best;
  }

  const VectorXd& origin() const { return origin_; }

 private:
  const Body& body_;
  MatrixXd rot_;
  VectorXd trans_;
  double tol_;
  VectorXd center_;
  VectorXd origin_;
  double reach_;
};

}  // namespace detail

struct BruteForceOptions {
  int n_dirs = 10000;
  double bisection_tol = 1e-6;
  /// Boundary samples per body used for the coarse support values.
  int boundary_samples = 0;
  /// Grid directions whose supports are refined locally.
  int refine_top = 8;
  /// Angular step (radians) at which the direction polish stops.
  double direction_tol = 1e-5;
};

/// Direction sweep over the support-function separation
///   sep(a) = min_{x in B_j} a.x - max_{x in B_i} a.x,
/// whose maximum is the signed minimum translation of B_i along a that makes
/// the bodies touch. Returns that offset and direction.
inline BruteForceMott brute_force_mott(const Body& body_i, const Pose& pose_i, const Body& body_j,
                                       const Pose& pose_j, const BruteForceOptions& opts = {}) {
  const int dim = body_dim(body_i);
  require(dim == body_dim(body_j), ErrorKind::DimensionMismatch, "bodies have different dimensions");
  require(opts.n_dirs >= (dim == 2 ? 360 : 10000), ErrorKind::InvalidArgument,
          "brute_force_mott needs n_dirs >= 360 (2D) or >= 10^4 (3D)");
  const int n_samples = opts.boundary_samples > 0 ? opts.boundary_samples : (dim == 2 ? 720 : 2000);

  const detail::RayBoundary ray_i(body_i, pose_i, opts.bisection_tol);
  const detail::RayBoundary ray_j(body_j, pose_j, opts.bisection_tol);
  const auto sample_dirs = detail::grid_directions(dim, n_samples);
  MatrixXd samples_i(dim, n_samples), samples_j(dim, n_samples);
  for (int k = 0; k < n_samples; ++k) {
    samples_i.col(k) = ray_i.point(sample_dirs[k]);
    samples_j.col(k) = ray_j.point(sample_dirs[k]);
  }

  const auto grid = detail::grid_directions(dim, opts.n_dirs);
  std::vector<std::pair<double, int>> seps;
  seps.reserve(static_cast<std::size_t>(opts.n_dirs));
  for (int k = 0; k < opts.n_dirs; ++k) {
    const VectorXd& n = grid[k];
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (int m = 0; m < n_samples; ++m) {
      hi = std::max(hi, samples_i.col(m).dot(n));
      lo = std::min(lo, samples_j.col(m).dot(n));
    }
    seps.emplace_back(lo - hi, k);
  }
  std::sort(seps.begin(), seps.end(), [](const auto& x, const auto& y) { return x.first > y.first; });

  const double sample_step = dim == 2 ? 2.0 * std::numbers::pi / n_samples : std::sqrt(4.0 * std::numbers::pi / n_samples);
  const auto sep_refined = [&](const VectorXd& n) {
    Eigen::Index bi = 0, bj = 0;
    (samples_i.transpose() * n).maxCoeff(&bi);
    (samples_j.transpose() * n).minCoeff(&bj);
    const VectorXd di = (samples_i.col(bi) - ray_i.origin()).normalized();
    const VectorXd dj = (samples_j.col(bj) - ray_j.origin()).normalized();
    const double hi = ray_i.refined_support(n, di, sample_step, 1e-7);
    const double lo_j = -ray_j.refined_support(-n, dj, sample_step, 1e-7);
    return lo_j - hi;
  };

  // Refine supports on the best grid directions, then polish the winning
  // direction itself by pattern search on the refined separation.
  BruteForceMott best{-std::numeric_limits<double>::infinity(), VectorXd()};
  const int top = std::min(opts.refine_top, opts.n_dirs);
  for (int t = 0; t < top; ++t) {
    const VectorXd& n = grid[seps[t].second];
    const double val = sep_refined(n);
    if (val > best.phi) best = {val, n};
  }
  double step = dim == 2 ? std::numbers::pi / opts.n_dirs : std::sqrt(std::numbers::pi / opts.n_dirs);
  while (step > opts.direction_tol) {
    const MatrixXd basis = detail::tangent_basis(best.a);
    bool improved = false;
    for (int c = 0; c < dim - 1; ++c)
      for (double sign : {1.0, -1.0}) {
        const VectorXd cand = (best.a + sign * step * basis.col(c)).normalized();
        const double val = sep_refined(cand);
        if (val > best.phi) {
          best = {val, cand};
          improved = true;
        }
      }
    if (!improved) step *= 0.5;
  }
  return best;
}

/// 100 (phi_solution - phi_accurate) / phi_accurate, for non-penetrating pairs.
inline double percent_error(double phi_solution, double phi_accurate) {
  require(phi_accurate > 1e-9, ErrorKind::InvalidArgument, "percent error needs phi_accurate > 1e-9");
  return 100.0 * (phi_solution - phi_accurate) / phi_accurate;
}

struct PenetrationCheck {
  bool overlapping = false;
  std::optional<VectorXd> witness;
  int interior_samples = 0;
};

/// Rejection-samples body_i's interior and reports Overlapping when any
/// sample lies inside body_j. One-sided: small overlaps can be missed.
inline PenetrationCheck sampled_penetration(const Body& body_i, const Pose& pose_i, const Body& body_j,
                                            const Pose& pose_j, int n_samples, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  const auto [lo, hi] = body_bounding_box(body_i);
  const int dim = body_dim(body_i);
  std::vector<std::uniform_real_distribution<double>> coord;
  for (int d = 0; d < dim; ++d) coord.emplace_back(lo[d], hi[d]);
  PenetrationCheck out;
  const long long max_draws = 1000LL * n_samples;
  VectorXd xb(dim);
  for (long long draw = 0; draw < max_draws && out.interior_samples < n_samples; ++draw) {
    for (int d = 0; d < dim; ++d) xb[d] = coord[d](rng);
    const double gi = std::visit([&](const auto& b) { return b.g_local(xb); }, body_i);
    if (gi > 0.0) continue;
    ++out.interior_samples;
    const VectorXd xw = pose_i.to_world(xb);
    if (eval_g(body_j, xw, pose_j) <= 0.0) {
      out.overlapping = true;
      out.witness = xw;
      return out;
    }
  }
  return out;
}

}  // namespace mott
