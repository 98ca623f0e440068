#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mott/polytope.hpp"
#include "mott/pose.hpp"

namespace mott {

/// Value, gradient and Hessian of an implicit body function at one point.
struct LocalEval {
  double g = 0.0;
  VectorXd grad;
  MatrixXd hess;
};

namespace detail {
inline double ipow(double base, int exp) {
  double out = 1.0;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}
}  // namespace detail

/// Smooth inner approximation of a polytope:
///   g(x) = sum_k (2 y_k / ybar_k + 1)^(2 rho) - 1,  y = facets x - offsets.
class SuperquadBody {
 public:
  SuperquadBody() = default;

  /// Tight construction: ybar = eta * facet_bounds(p), center = Chebyshev center.
  static SuperquadBody approximate(const Polytope& p, int rho, double eta = 1.0) {
    require(eta >= 1.0, ErrorKind::InvalidArgument, "bound inflation eta must be >= 1");
    return SuperquadBody(p, rho, eta * facet_bounds(p), chebyshev_center(p).center);
  }

  SuperquadBody(Polytope p, int rho, VectorXd ybar, VectorXd center)
      : polytope_(std::move(p)), ybar_(std::move(ybar)), rho_(rho), center_(std::move(center)) {
    require(rho_ >= 1, ErrorKind::InvalidBody, "rho must be a positive integer");
    require(ybar_.size() == polytope_.n_facets(), ErrorKind::DimensionMismatch, "ybar length must equal facet count");
    require((ybar_.array() > 0.0).all(), ErrorKind::InvalidBody, "ybar must be strictly positive");
    require(center_.size() == polytope_.dim(), ErrorKind::DimensionMismatch, "center dimension mismatch");
    require(g_local(center_) < 0.0, ErrorKind::EmptyInterior,
            "interior center is not strictly inside the approximation (rho=" + std::to_string(rho_) + ")");
  }

  int dim() const { return polytope_.dim(); }
  int rho() const { return rho_; }
  const Polytope& polytope() const { return polytope_; }
  const MatrixXd& facets() const { return polytope_.facets(); }
  const VectorXd& offsets() const { return polytope_.offsets(); }
  const VectorXd& ybar() const { return ybar_; }
  const VectorXd& center() const { return center_; }

  double g_local(const VectorXd& x) const {
    require(x.size() == dim(), ErrorKind::DimensionMismatch, "point dimension mismatch");
    const MatrixXd& a = facets();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
      const double z = 2.0 * (a.row(k).dot(x) - offsets()[k]) / ybar_[k] + 1.0;
      sum += detail::ipow(z, 2 * rho_);
    }
    return sum - 1.0;
  }

  LocalEval eval_local(const VectorXd& x, bool with_hessian = true) const {
    require(x.size() == dim(), ErrorKind::DimensionMismatch, "point dimension mismatch");
    const VectorXd z = scaled(x);
    LocalEval out{-1.0, VectorXd::Zero(dim()), MatrixXd::Zero(dim(), dim())};
    const int p = 2 * rho_;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      const double s = 2.0 / ybar_[k];
      const double zp2 = p >= 2 ? detail::ipow(z[k], p - 2) : 1.0;
      const double zp1 = zp2 * z[k];
      out.g += zp1 * z[k];
      out.grad += (p * zp1 * s) * facets().row(k).transpose();
      if (with_hessian)
        out.hess += (p * (p - 1) * zp2 * s * s) * facets().row(k).transpose() * facets().row(k);
    }
    return out;
  }

  /// Radius of a ball around the body-frame origin containing the body.
  double bounding_radius() const {
    auto [lo, hi] = polytope_.bounding_box();
    return lo.cwiseAbs().cwiseMax(hi.cwiseAbs()).norm();
  }

  std::pair<VectorXd, VectorXd> bounding_box() const { return polytope_.bounding_box(); }

 private:
  VectorXd scaled(const VectorXd& x) const {
    return (2.0 * (facets() * x - offsets()).array() / ybar_.array() + 1.0).matrix();
  }

  Polytope polytope_;
  VectorXd ybar_;
  int rho_ = 3;
  VectorXd center_;
};

/// Sphere (g = |x|^2 - r^2) or ellipsoid (g = x^T Q x - 1), centred at the
/// body-frame origin.
class AnalyticBody {
 public:
  enum class Kind { Sphere, Ellipsoid };

  static AnalyticBody sphere(int dim, double radius) {
    require(dim == 2 || dim == 3, ErrorKind::DimensionMismatch, "dimension must be 2 or 3");
    require(radius > 0.0, ErrorKind::InvalidBody, "sphere radius must be positive");
    AnalyticBody b;
    b.kind_ = Kind::Sphere;
    b.radius_ = radius;
    b.shape_ = MatrixXd::Identity(dim, dim) / (radius * radius);
    return b;
  }

  static AnalyticBody ellipsoid(const MatrixXd& shape) {
    require(shape.rows() == shape.cols() && (shape.rows() == 2 || shape.rows() == 3),
            ErrorKind::DimensionMismatch, "ellipsoid shape matrix must be 2x2 or 3x3");
    require((shape - shape.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, shape.cwiseAbs().maxCoeff()),
            ErrorKind::InvalidBody, "ellipsoid shape matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(shape);
    require(eig.eigenvalues().minCoeff() > 0.0, ErrorKind::InvalidBody,
            "ellipsoid shape matrix must be positive definite");
    AnalyticBody b;
    b.kind_ = Kind::Ellipsoid;
    b.shape_ = shape;
    b.radius_ = 1.0 / std::sqrt(eig.eigenvalues().minCoeff());
    return b;
  }

  Kind kind() const { return kind_; }
  int dim() const { return static_cast<int>(shape_.rows()); }
  double radius() const { return radius_; }
  const MatrixXd& shape() const { return shape_; }
  VectorXd center() const { return VectorXd::Zero(dim()); }

  double g_local(const VectorXd& x) const {
    require(x.size() == dim(), ErrorKind::DimensionMismatch, "point dimension mismatch");
    if (kind_ == Kind::Sphere) return x.squaredNorm() - radius_ * radius_;
    return x.dot(shape_ * x) - 1.0;
  }

  LocalEval eval_local(const VectorXd& x, bool with_hessian = true) const {
    require(x.size() == dim(), ErrorKind::DimensionMismatch, "point dimension mismatch");
    LocalEval out;
    if (kind_ == Kind::Sphere) {
      out.g = x.squaredNorm() - radius_ * radius_;
      out.grad = 2.0 * x;
      if (with_hessian) out.hess = 2.0 * MatrixXd::Identity(dim(), dim());
    } else {
      const VectorXd qx = shape_ * x;
      out.g = x.dot(qx) - 1.0;
      out.grad = 2.0 * qx;
      if (with_hessian) out.hess = 2.0 * shape_;
    }
    if (!with_hessian) out.hess = MatrixXd::Zero(dim(), dim());
    return out;
  }

  double bounding_radius() const { return radius_; }

  std::pair<VectorXd, VectorXd> bounding_box() const {
    const VectorXd half = shape_.inverse().diagonal().cwiseSqrt();
    return {-half, half};
  }

 private:
  Kind kind_ = Kind::Sphere;
  double radius_ = 1.0;
  MatrixXd shape_;
};

using Body = std::variant<SuperquadBody, AnalyticBody>;

inline int body_dim(const Body& b) {
  return std::visit([](const auto& x) { return x.dim(); }, b);
}

/// Interior point in body frame (Chebyshev center or origin).
inline VectorXd body_center(const Body& b) {
  return std::visit([](const auto& x) -> VectorXd { return x.center(); }, b);
}

inline double bounding_radius(const Body& b) {
  return std::visit([](const auto& x) { return x.bounding_radius(); }, b);
}

inline std::pair<VectorXd, VectorXd> body_bounding_box(const Body& b) {
  return std::visit([](const auto& x) { return x.bounding_box(); }, b);
}

namespace detail {
inline void check_dims(const Body& body, const VectorXd& x, const Pose& pose) {
  const int d = body_dim(body);
  require(x.size() == d && pose.dim() == d, ErrorKind::DimensionMismatch,
          "point/pose dimension does not match body dimension " + std::to_string(d));
}
}  // namespace detail

inline double eval_g(const Body& body, const VectorXd& x_world, const Pose& pose) {
  detail::check_dims(body, x_world, pose);
  const VectorXd xb = pose.to_body(x_world);
  return std::visit([&](const auto& b) { return b.g_local(xb); }, body);
}

/// World-frame value, gradient R grad_b and Hessian R H_b R^T.
inline LocalEval evaluate(const Body& body, const VectorXd& x_world, const Pose& pose, bool with_hessian = true) {
  detail::check_dims(body, x_world, pose);
  const MatrixXd r = pose.rotation_matrix();
  const VectorXd xb = r.transpose() * (x_world - pose.translation);
  LocalEval e = std::visit([&](const auto& b) { return b.eval_local(xb, with_hessian); }, body);
  e.grad = r * e.grad;
  if (with_hessian) e.hess = r * e.hess * r.transpose();
  return e;
}

inline VectorXd eval_grad(const Body& body, const VectorXd& x_world, const Pose& pose) {
  return evaluate(body, x_world, pose, false).grad;
}

inline MatrixXd eval_hess(const Body& body, const VectorXd& x_world, const Pose& pose) {
  return evaluate(body, x_world, pose, true).hess;
}

inline constexpr double kGradEps = 1e-9;

inline VectorXd unit_grad(const Body& body, const VectorXd& x_world, const Pose& pose, double eps = kGradEps) {
  const VectorXd grad = eval_grad(body, x_world, pose);
  const double norm = grad.norm();
  if (norm < eps) throw Error(ErrorKind::DegenerateGradient, "gradient norm below threshold");
  return grad / norm;
}

/// Derivatives of g and of the world-frame gradient with respect to the pose
/// parameters [translation; rotation].
struct PoseJacobians {
  VectorXd dg_dq;
  MatrixXd dgrad_dq;
};

inline PoseJacobians pose_jacobians(const Body& body, const VectorXd& x_world, const Pose& pose) {
  detail::check_dims(body, x_world, pose);
  const int d = pose.dim();
  const MatrixXd r = pose.rotation_matrix();
  const VectorXd rel = x_world - pose.translation;
  const VectorXd xb = r.transpose() * rel;
  const LocalEval e = std::visit([&](const auto& b) { return b.eval_local(xb, true); }, body);
  const MatrixXd hw = r * e.hess * r.transpose();

  PoseJacobians out{VectorXd(pose.n_params()), MatrixXd(d, pose.n_params())};
  out.dg_dq.head(d) = -(r * e.grad);
  out.dgrad_dq.leftCols(d) = -hw;
  const auto dr = rotation_derivatives(pose.rotation);
  for (std::size_t k = 0; k < dr.size(); ++k) {
    const VectorXd dxb = dr[k].transpose() * rel;
    out.dg_dq[d + static_cast<Eigen::Index>(k)] = e.grad.dot(dxb);
    out.dgrad_dq.col(d + static_cast<Eigen::Index>(k)) = dr[k] * e.grad + r * (e.hess * dxb);
  }
  return out;
}

/// Degree-one gauge of g with the same zero level set: value h and dh/dg.
/// Superquads use (g + 1)^(1 / 2 rho) - 1, spheres |x| / r - 1 and ellipsoids
/// sqrt(g + 1) - 1. Its gradient does not vanish on the plateau around the
/// center where high-rho superquads are flat.
inline std::pair<double, double> gauge_from_g(const Body& body, double g) {
  constexpr double kFloor = 1e-300;
  if (const auto* sq = std::get_if<SuperquadBody>(&body)) {
    const double e = 1.0 / (2.0 * sq->rho());
    const double base = std::max(g + 1.0, kFloor);
    const double h = std::pow(base, e);
    return {h - 1.0, e * h / base};
  }
  const auto& an = std::get<AnalyticBody>(body);
  const double r2 = an.kind() == AnalyticBody::Kind::Sphere ? an.radius() * an.radius() : 1.0;
  const double h = std::sqrt(std::max((g + r2) / r2, kFloor));
  return {h - 1.0, 1.0 / (2.0 * r2 * h)};
}

}  // namespace mott
