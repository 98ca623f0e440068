#pragma once

#include <string>
#include <utility>

#include "mott/lp.hpp"

namespace mott {

/// H-representation convex body {x | facets x <= offsets} in body frame.
class Polytope {
 public:
  Polytope() = default;

  /// Validates shape, nonzero rows, boundedness and a nonempty interior.
  Polytope(MatrixXd facets, VectorXd offsets) : facets_(std::move(facets)), offsets_(std::move(offsets)) {
    const auto nx = facets_.cols();
    require(nx == 2 || nx == 3, ErrorKind::DimensionMismatch, "polytope dimension must be 2 or 3");
    require(offsets_.size() == facets_.rows(), ErrorKind::DimensionMismatch,
            "polytope offsets length must equal facet count");
    require(facets_.rows() >= nx + 1, ErrorKind::InvalidBody, "polytope needs at least N_x + 1 facets");
    require(facets_.allFinite() && offsets_.allFinite(), ErrorKind::InvalidBody, "polytope has non-finite entries");
    for (Eigen::Index k = 0; k < facets_.rows(); ++k)
      require(facets_.row(k).norm() > 1e-12, ErrorKind::InvalidBody,
              "facet " + std::to_string(k) + " has zero normal");
    for (Eigen::Index d = 0; d < nx; ++d) {
      for (double sign : {1.0, -1.0}) {
        const auto res = solve_lp({sign * VectorXd::Unit(nx, d), facets_, offsets_});
        require(res.status != LpStatus::Infeasible, ErrorKind::InvalidBody, "polytope is empty");
        require(res.status != LpStatus::Unbounded, ErrorKind::InvalidBody,
                "polytope is unbounded along axis " + std::to_string(d));
      }
    }
  }

  int dim() const { return static_cast<int>(facets_.cols()); }
  int n_facets() const { return static_cast<int>(facets_.rows()); }
  const MatrixXd& facets() const { return facets_; }
  const VectorXd& offsets() const { return offsets_; }

  bool contains(const VectorXd& x, double tol = 0.0) const {
    return ((facets_ * x - offsets_).array() <= tol).all();
  }

  /// Axis-aligned box [lower, upper] via 2 N_x LPs.
  std::pair<VectorXd, VectorXd> bounding_box() const {
    VectorXd lo(dim()), hi(dim());
    for (int d = 0; d < dim(); ++d) {
      lo[d] = solve_lp({VectorXd::Unit(dim(), d), facets_, offsets_}).value;
      hi[d] = -solve_lp({-VectorXd::Unit(dim(), d), facets_, offsets_}).value;
    }
    return {lo, hi};
  }

  /// Axis-aligned box [-half, half] centred at the origin.
  static Polytope box(const VectorXd& half_extents) {
    const auto nx = half_extents.size();
    MatrixXd a(2 * nx, nx);
    a << MatrixXd::Identity(nx, nx), -MatrixXd::Identity(nx, nx);
    VectorXd b(2 * nx);
    b << half_extents, half_extents;
    return Polytope(a, b);
  }

 private:
  MatrixXd facets_;
  VectorXd offsets_;
};

/// ybar_k = offsets_k - min over the polytope of facets_k . x. One LP per facet.
inline VectorXd facet_bounds(const Polytope& p) {
  VectorXd ybar(p.n_facets());
  for (int k = 0; k < p.n_facets(); ++k) {
    const auto res = solve_lp({p.facets().row(k).transpose(), p.facets(), p.offsets()});
    require(res.optimal(), ErrorKind::InvalidBody,
            "facet bound LP for facet " + std::to_string(k) + " is not optimal");
    ybar[k] = p.offsets()[k] - res.value;
  }
  return ybar;
}

struct ChebyshevBall {
  VectorXd center;
  double radius = 0.0;
};

/// Largest inscribed ball: max r s.t. a_k . x + |a_k| r <= b_k.
inline ChebyshevBall chebyshev_center(const Polytope& p) {
  const int nx = p.dim();
  const int ny = p.n_facets();
  MatrixXd a(ny + 1, nx + 1);
  VectorXd b(ny + 1);
  a.topLeftCorner(ny, nx) = p.facets();
  a.topRightCorner(ny, 1) = p.facets().rowwise().norm();
  b.head(ny) = p.offsets();
  a.row(ny).setZero();
  a(ny, nx) = -1.0;
  b[ny] = 0.0;
  VectorXd cost = VectorXd::Zero(nx + 1);
  cost[nx] = -1.0;
  const auto res = solve_lp({cost, a, b});
  require(res.optimal(), ErrorKind::EmptyInterior, "Chebyshev LP is not optimal");
  ChebyshevBall ball{res.x.head(nx), res.x[nx]};
  require(ball.radius > 1e-12, ErrorKind::EmptyInterior, "polytope has empty interior");
  return ball;
}

}  // namespace mott
