#include <gtest/gtest.h>

#include <cmath>

#include "mott/polytope.hpp"
#include "mott/sampling.hpp"

namespace mott {
namespace {

MatrixXd rows(std::initializer_list<std::initializer_list<double>> r) {
  MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Polytope unit_square() { return Polytope::box(vec({1.0, 1.0})); }
Polytope simplex2() { return Polytope(rows({{-1, 0}, {0, -1}, {1, 1}}), vec({0, 0, 1})); }

void expect_dual_certificate(const LinearProgram& lp, const LpResult& res) {
  ASSERT_TRUE(res.optimal());
  EXPECT_LE((lp.ineq_matrix * res.x - lp.ineq_rhs).maxCoeff(), 1e-9);
  EXPECT_GE(res.dual.minCoeff(), 0.0);
  EXPECT_LE((lp.cost + lp.ineq_matrix.transpose() * res.dual).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(std::abs(res.value - res.dual_value(lp)), 1e-8);
}

TEST(SolveLp, OneDimensionalOptimum) {
  const LinearProgram lp{vec({-1}), rows({{1}, {-1}}), vec({1, 0})};
  const auto res = solve_lp(lp);
  ASSERT_TRUE(res.optimal());
  EXPECT_NEAR(res.x[0], 1.0, 1e-12);
  EXPECT_NEAR(res.value, -1.0, 1e-12);
  expect_dual_certificate(lp, res);
}

TEST(SolveLp, DetectsInfeasible) {
  const auto res = solve_lp({vec({1}), rows({{-1}, {1}}), vec({-1, 0})});
  EXPECT_EQ(res.status, LpStatus::Infeasible);
}

TEST(SolveLp, DetectsUnbounded) {
  const auto res = solve_lp({vec({-1, 0}), rows({{-1, 0}, {0, 1}}), vec({0, 1})});
  EXPECT_EQ(res.status, LpStatus::Unbounded);
}

TEST(SolveLp, UnitBoxCorner) {
  const Polytope box = unit_square();
  const LinearProgram lp{vec({-1, -1}), box.facets(), box.offsets()};
  const auto res = solve_lp(lp);
  ASSERT_TRUE(res.optimal());
  EXPECT_NEAR(res.x[0], 1.0, 1e-12);
  EXPECT_NEAR(res.x[1], 1.0, 1e-12);
  EXPECT_NEAR(res.value, -2.0, 1e-12);
  expect_dual_certificate(lp, res);
}

TEST(SolveLp, NegativeRhsNeedsPhaseOne) {
  // x >= 2, y >= 3, x + y <= 10; minimize x + 2y -> (2, 3)
  const LinearProgram lp{vec({1, 2}), rows({{-1, 0}, {0, -1}, {1, 1}}), vec({-2, -3, 10})};
  const auto res = solve_lp(lp);
  ASSERT_TRUE(res.optimal());
  EXPECT_NEAR(res.value, 8.0, 1e-10);
  expect_dual_certificate(lp, res);
}

TEST(SolveLp, DualGapOnRandomPrograms) {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int dim = trial % 2 == 0 ? 2 : 3;
    const Polytope p = random_polytope(rng, dim, 6 + trial % 7);
    const LinearProgram lp{random_unit_vector(rng, dim), p.facets(), p.offsets()};
    expect_dual_certificate(lp, solve_lp(lp));
  }
}

TEST(SolveLp, DimensionMismatchThrows) {
  EXPECT_THROW(solve_lp({vec({1, 1}), rows({{1}}), vec({1})}), Error);
}

TEST(FacetBounds, UnitBox) {
  const VectorXd ybar = facet_bounds(unit_square());
  EXPECT_LE((ybar - VectorXd::Constant(4, 2.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FacetBounds, Simplex) {
  const VectorXd ybar = facet_bounds(simplex2());
  EXPECT_LE((ybar - VectorXd::Ones(3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ChebyshevCenter, UnitBox) {
  const auto ball = chebyshev_center(unit_square());
  EXPECT_LE(ball.center.norm(), 1e-12);
  EXPECT_NEAR(ball.radius, 1.0, 1e-12);
}

TEST(ChebyshevCenter, SimplexIsEquidistantFromAllFacets) {
  const Polytope p = simplex2();
  const auto ball = chebyshev_center(p);
  for (int k = 0; k < p.n_facets(); ++k) {
    const double dist = (p.offsets()[k] - p.facets().row(k).dot(ball.center)) / p.facets().row(k).norm();
    EXPECT_NEAR(dist, ball.radius, 1e-9);
  }
  EXPECT_NEAR(ball.radius, 1.0 / (2.0 + std::sqrt(2.0)), 1e-12);
}

TEST(ChebyshevCenter, TranslationEquivariant) {
  const Polytope p = simplex2();
  const VectorXd shift = vec({3.0, -2.0});
  const Polytope moved(p.facets(), p.offsets() + p.facets() * shift);
  const auto a = chebyshev_center(p);
  const auto b = chebyshev_center(moved);
  EXPECT_LE((b.center - a.center - shift).norm(), 1e-9);
  EXPECT_NEAR(a.radius, b.radius, 1e-12);
}

TEST(ChebyshevCenter, RandomPolytopesRadiusMatchesMinFacetDistance) {
  Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const Polytope p = random_polytope(rng, 3, 10);
    const auto ball = chebyshev_center(p);
    double min_dist = std::numeric_limits<double>::infinity();
    for (int k = 0; k < p.n_facets(); ++k)
      min_dist = std::min(min_dist, (p.offsets()[k] - p.facets().row(k).dot(ball.center)) / p.facets().row(k).norm());
    EXPECT_NEAR(min_dist, ball.radius, 1e-8);
  }
}

TEST(Polytope, RejectsInvalidInput) {
  EXPECT_THROW(Polytope(rows({{1, 0}, {0, 1}}), vec({1, 1})), Error);                     // too few facets
  EXPECT_THROW(Polytope(rows({{1, 0}, {0, 1}, {1, 1}}), vec({1, 1, 1})), Error);          // unbounded
  EXPECT_THROW(Polytope(rows({{1, 0}, {0, 0}, {-1, -1}}), vec({1, 1, 1})), Error);        // zero row
  EXPECT_THROW(Polytope(rows({{1, 0}, {-1, 0}, {0, 1}, {0, -1}}), vec({-1, -1, 1, 1})), Error);  // empty
  EXPECT_THROW(chebyshev_center(Polytope(rows({{1, 0}, {-1, 0}, {0, 1}, {0, -1}}), vec({0, 0, 1, 1}))), Error);
}

}  // namespace
}  // namespace mott
