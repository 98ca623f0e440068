#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "mott/error.hpp"

namespace mott {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

inline int rotation_size(int dim) { return dim == 2 ? 1 : 3; }
inline int pose_size(int dim) { return dim + rotation_size(dim); }

/// Exponential map. 2D: planar angle; 3D: rotation vector (axis * angle).
inline MatrixXd rotation_matrix(const VectorXd& rotation) {
  if (rotation.size() == 1) {
    const double c = std::cos(rotation[0]), s = std::sin(rotation[0]);
    MatrixXd r(2, 2);
    r << c, -s, s, c;
    return r;
  }
  require(rotation.size() == 3, ErrorKind::DimensionMismatch, "rotation must have 1 or 3 entries");
  const Eigen::Vector3d theta = rotation;
  const double angle = theta.norm();
  if (angle < 1e-12) return (Eigen::Matrix3d::Identity() + skew(theta)).eval();
  return Eigen::AngleAxisd(angle, theta / angle).toRotationMatrix();
}

/// Partial derivatives dR/d(rotation_k), one matrix per rotation parameter.
inline std::vector<MatrixXd> rotation_derivatives(const VectorXd& rotation) {
  if (rotation.size() == 1) {
    const double c = std::cos(rotation[0]), s = std::sin(rotation[0]);
    MatrixXd d(2, 2);
    d << -s, -c, c, -s;
    return {d};
  }
  require(rotation.size() == 3, ErrorKind::DimensionMismatch, "rotation must have 1 or 3 entries");
  const Eigen::Vector3d theta = rotation;
  const double sq = theta.squaredNorm();
  std::vector<MatrixXd> out;
  out.reserve(3);
  if (sq < 1e-14) {
    // Second-order expansion of exp([theta]x) about the identity.
    for (int k = 0; k < 3; ++k) {
      const Eigen::Matrix3d ek = skew(Eigen::Vector3d::Unit(k));
      const Eigen::Matrix3d th = skew(theta);
      out.emplace_back(ek + 0.5 * (ek * th + th * ek));
    }
    return out;
  }
  const Eigen::Matrix3d r = rotation_matrix(rotation);
  const Eigen::Matrix3d i_minus_r = Eigen::Matrix3d::Identity() - r;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d v = theta.cross(i_minus_r.col(k));
    out.emplace_back(((theta[k] * skew(theta) + skew(v)) / sq) * r);
  }
  return out;
}

/// Inverse of rotation_matrix.
inline VectorXd rotation_log(const MatrixXd& r) {
  if (r.rows() == 2) {
    VectorXd out(1);
    out[0] = std::atan2(r(1, 0), r(0, 0));
    return out;
  }
  const Eigen::Matrix3d m = r;
  const Eigen::AngleAxisd aa(m);
  return VectorXd(aa.axis() * aa.angle());
}

/// Rigid transform mapping body-frame points into the world frame:
/// x_world = R(rotation) x_body + translation.
struct Pose {
  VectorXd translation;
  VectorXd rotation;

  Pose() = default;
  Pose(VectorXd t, VectorXd r) : translation(std::move(t)), rotation(std::move(r)) {
    require(translation.size() == 2 || translation.size() == 3, ErrorKind::DimensionMismatch,
            "pose translation must have 2 or 3 entries");
    require(rotation.size() == rotation_size(static_cast<int>(translation.size())),
            ErrorKind::DimensionMismatch, "pose rotation size does not match dimension");
  }

  static Pose identity(int dim) {
    return Pose(VectorXd::Zero(dim), VectorXd::Zero(rotation_size(dim)));
  }

  /// Builds a pose from stacked [translation; rotation] parameters.
  static Pose from_params(const VectorXd& params) {
    require(params.size() == 3 || params.size() == 6, ErrorKind::DimensionMismatch,
            "pose parameter vector must have 3 or 6 entries");
    const int dim = params.size() == 3 ? 2 : 3;
    return Pose(params.head(dim), params.tail(rotation_size(dim)));
  }

  int dim() const { return static_cast<int>(translation.size()); }
  int n_params() const { return pose_size(dim()); }

  VectorXd params() const {
    VectorXd p(n_params());
    p << translation, rotation;
    return p;
  }

  MatrixXd rotation_matrix() const { return mott::rotation_matrix(rotation); }

  VectorXd to_world(const VectorXd& x_body) const { return rotation_matrix() * x_body + translation; }
  VectorXd to_body(const VectorXd& x_world) const {
    return rotation_matrix().transpose() * (x_world - translation);
  }

  /// (outer * inner): first apply inner, then outer.
  friend Pose compose(const Pose& outer, const Pose& inner) {
    const MatrixXd r_outer = outer.rotation_matrix();
    return Pose(r_outer * inner.translation + outer.translation,
                rotation_log(r_outer * inner.rotation_matrix()));
  }
};

inline bool operator==(const Pose& a, const Pose& b) {
  return a.translation.size() == b.translation.size() && a.rotation.size() == b.rotation.size() &&
         a.translation == b.translation && a.rotation == b.rotation;
}

}  // namespace mott
