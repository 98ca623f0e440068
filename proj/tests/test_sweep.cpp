#include <gtest/gtest.h>

#include <array>

#include "mott/sweep.hpp"

namespace mott {
namespace {

TEST(SweepPairs, SeededSeparatedAndReproducible) {
  const auto a = sweep_pairs(20, 5), b = sweep_pairs(20, 5);
  ASSERT_EQ(a.size(), 20u);
  const SweepDistribution dist;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].pose_j, b[k].pose_j);
    EXPECT_EQ(a[k].phi_accurate, b[k].phi_accurate);
    EXPECT_GE(a[k].phi_accurate, dist.min_gap);
    const double d = closest_points(enumerate_vertices(a[k].p_i, a[k].pose_i),
                                    enumerate_vertices(a[k].p_j, a[k].pose_j))
                         .distance;
    EXPECT_NEAR(d, a[k].phi_accurate, 1e-12);
  }
  EXPECT_NE(sweep_pairs(1, 6)[0].pose_j, a[0].pose_j);
}

TEST(SweepPairs, CutBoxesAreValidPolytopes) {
  Rng rng(3);
  const SweepDistribution dist;
  for (int k = 0; k < 50; ++k) {
    const Polytope p = random_cut_box(rng, dist);
    EXPECT_GE(p.n_facets(), 6);
    EXPECT_LE(p.n_facets(), 6 + dist.max_cuts);
    EXPECT_GT(chebyshev_center(p).radius, 0.0);
  }
}

TEST(RunSweep, InnerApproximationOverestimatesDistance) {
  const auto pairs = sweep_pairs(10, 8);
  for (const auto& sp : pairs) {
    const auto s = sweep_sample(sp, 3);
    ASSERT_TRUE(s.ok);
    EXPECT_GE(s.phi, sp.phi_accurate - 1e-9);
  }
}

TEST(RunSweep, RowsEchoRhoAndIgnoreThreadCount) {
  const auto pairs = sweep_pairs(12, 9);
  const auto serial = run_sweep(pairs, {1, 5, 9}, 1);
  const auto parallel = run_sweep(pairs, {1, 5, 9}, 3);
  ASSERT_EQ(serial.size(), 3u);
  for (std::size_t k = 0; k < serial.size(); ++k) {
    EXPECT_EQ(serial[k].rho, (std::array<int, 3>{1, 5, 9})[k]);
    EXPECT_EQ(serial[k].mean_abs_pct_error, parallel[k].mean_abs_pct_error);
    EXPECT_EQ(serial[k].n_ok + serial[k].n_failed, 12);
  }
  EXPECT_GT(serial[0].mean_abs_pct_error, serial[2].mean_abs_pct_error);
}

TEST(RunSweep, RejectsBadRhoList) {
  const auto pairs = sweep_pairs(1, 1);
  EXPECT_THROW(run_sweep(pairs, {}), Error);
  EXPECT_THROW(run_sweep(pairs, {0}), Error);
}

TEST(ContainmentSampling, ApproximationStaysInsidePolytope) {
  Rng rng(4);
  for (int rho : {1, 3, 9}) {
    const auto stats = containment_sampling(SuperquadBody::approximate(random_polytope(rng, 3, 10), rho), 2000, 7);
    EXPECT_EQ(stats.accepted, 2000);
    EXPECT_EQ(stats.outside, 0);
  }
}

}  // namespace
}  // namespace mott
