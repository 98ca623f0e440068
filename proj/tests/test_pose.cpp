#include <gtest/gtest.h>

#include "mott/pose.hpp"
#include "mott/sampling.hpp"
#include "support/finite_difference.hpp"

namespace mott {
namespace {

TEST(Pose, RotationIsProperOrthonormal) {
  Rng rng(11);
  for (int dim : {2, 3}) {
    for (int trial = 0; trial < 200; ++trial) {
      const MatrixXd r = rotation_matrix(random_rotation(rng, dim));
      EXPECT_LE((r.transpose() * r - MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    }
  }
}

TEST(Pose, RotationDerivativesMatchFiniteDifferences) {
  Rng rng(12);
  for (int dim : {2, 3}) {
    for (int trial = 0; trial < 50; ++trial) {
      const VectorXd theta = random_rotation(rng, dim);
      const auto analytic = rotation_derivatives(theta);
      for (std::size_t k = 0; k < analytic.size(); ++k) {
        const auto entry = [&](const VectorXd& t) {
          const MatrixXd r = rotation_matrix(t);
          return VectorXd(Eigen::Map<const VectorXd>(r.data(), r.size()));
        };
        const MatrixXd fd = testing::fd_jacobian(entry, theta).col(static_cast<Eigen::Index>(k));
        const VectorXd flat = Eigen::Map<const VectorXd>(analytic[k].data(), analytic[k].size());
        EXPECT_LE(testing::relative_error(flat, fd), 1e-7);
      }
    }
  }
}

TEST(Pose, DerivativeNearIdentityUsesSeries) {
  VectorXd theta = VectorXd::Constant(3, 1e-9);
  const auto d = rotation_derivatives(theta);
  EXPECT_LE((d[0] - MatrixXd(skew(Eigen::Vector3d::UnitX()))).norm(), 1e-8);
}

TEST(Pose, LogInvertsExp) {
  Rng rng(13);
  for (int dim : {2, 3}) {
    for (int trial = 0; trial < 50; ++trial) {
      const VectorXd theta = random_rotation(rng, dim);
      const MatrixXd r = rotation_matrix(theta);
      EXPECT_LE((rotation_matrix(rotation_log(r)) - r).norm(), 1e-12);
    }
  }
}

TEST(Pose, WorldBodyRoundTripAndCompose) {
  Rng rng(14);
  const Pose a(VectorXd::Random(3), random_rotation(rng, 3));
  const Pose b(VectorXd::Random(3), random_rotation(rng, 3));
  const VectorXd x = VectorXd::Random(3);
  EXPECT_LE((a.to_body(a.to_world(x)) - x).norm(), 1e-12);
  EXPECT_LE((compose(a, b).to_world(x) - a.to_world(b.to_world(x))).norm(), 1e-12);
}

TEST(Pose, RejectsBadSizes) {
  EXPECT_THROW(Pose(VectorXd::Zero(3), VectorXd::Zero(1)), Error);
  EXPECT_THROW(Pose::from_params(VectorXd::Zero(4)), Error);
  EXPECT_EQ(Pose::from_params(VectorXd::Zero(6)).dim(), 3);
}

}  // namespace
}  // namespace mott
