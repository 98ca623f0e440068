#include <gtest/gtest.h>

#include <algorithm>

#include "mott/mott.hpp"
#include "mott/oracle.hpp"
#include "mott/sampling.hpp"

namespace mott {
namespace {

using Eigen::Vector3d;

VectorXd vec2(double x, double y) { return (VectorXd(2) << x, y).finished(); }
Pose at2(double x, double y) { return Pose(vec2(x, y), VectorXd::Zero(1)); }

// Second vertex oracle: clip each facet plane against every other half-space
// and collect the corners of the resulting polygons.
std::vector<Vector3d> facet_polygon_vertices(const Polytope& p) {
  std::vector<Vector3d> out;
  const MatrixXd& a = p.facets();
  for (int k = 0; k < p.n_facets(); ++k) {
    const Vector3d n = a.row(k).transpose().normalized();
    const Vector3d origin = n * (p.offsets()[k] / a.row(k).norm());
    const MatrixXd basis = Eigen::HouseholderQR<MatrixXd>(MatrixXd(n)).householderQ();
    const Vector3d u = basis.col(1), w = basis.col(2);
    std::vector<Eigen::Vector2d> poly{{-100, -100}, {100, -100}, {100, 100}, {-100, 100}};
    for (int m = 0; m < p.n_facets() && !poly.empty(); ++m) {
      if (m == k) continue;
      const Vector3d am = a.row(m).transpose();
      const Eigen::Vector2d c(am.dot(u), am.dot(w));
      const double rhs = p.offsets()[m] - am.dot(origin);
      std::vector<Eigen::Vector2d> next;
      for (std::size_t s = 0; s < poly.size(); ++s) {
        const auto& P = poly[s];
        const auto& Q = poly[(s + 1) % poly.size()];
        const double fp = c.dot(P) - rhs, fq = c.dot(Q) - rhs;
        if (fp <= 0) next.push_back(P);
        if ((fp < 0) != (fq < 0) && fp != fq) next.push_back(P + (fp / (fp - fq)) * (Q - P));
      }
      poly = std::move(next);
    }
    for (const auto& q : poly) {
      const Vector3d x = origin + q.x() * u + q.y() * w;
      if (std::none_of(out.begin(), out.end(), [&](const Vector3d& y) { return (x - y).norm() < 1e-7; }))
        out.push_back(x);
    }
  }
  return out;
}

double segment_distance(const Vector3d& p0, const Vector3d& p1, const Vector3d& q0, const Vector3d& q1) {
  // Dense parameter search refined by alternating exact projections.
  const auto proj = [](const Vector3d& x, const Vector3d& a, const Vector3d& b) {
    const Vector3d d = b - a;
    return std::clamp((x - a).dot(d) / std::max(d.squaredNorm(), 1e-300), 0.0, 1.0);
  };
  double best = std::numeric_limits<double>::infinity();
  for (double s0 : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    double s = s0, t = 0.0;
    for (int it = 0; it < 2000; ++it) {
      t = proj(p0 + s * (p1 - p0), q0, q1);
      s = proj(q0 + t * (q1 - q0), p0, p1);
    }
    best = std::min(best, ((p0 + s * (p1 - p0)) - (q0 + t * (q1 - q0))).norm());
  }
  return best;
}

// Feature-enumeration distance between separated posed polytopes:
// min over edge-edge and vertex-facet pairs.
double feature_distance(const Polytope& pa, const Pose& qa, const VertexHull& ha, const Polytope& pb,
                        const Pose& qb, const VertexHull& hb) {
  const auto edges = [](const VertexHull& h) {
    std::vector<std::pair<int, int>> e;
    for (int s = 0; s < h.size(); ++s)
      for (int t = s + 1; t < h.size(); ++t) {
        int shared = 0;
        for (int f : h.active[s]) shared += static_cast<int>(std::count(h.active[t].begin(), h.active[t].end(), f));
        if (shared >= 2) e.emplace_back(s, t);
      }
    return e;
  };
  double best = std::numeric_limits<double>::infinity();
  for (auto [s, t] : edges(ha))
    for (auto [u, v] : edges(hb))
      best = std::min(best, segment_distance(ha.vertex(s), ha.vertex(t), hb.vertex(u), hb.vertex(v)));
  const auto vertex_facet = [&](const VertexHull& hv, const Polytope& pf, const Pose& qf) {
    for (int s = 0; s < hv.size(); ++s) {
      const VectorXd xb = qf.to_body(hv.vertex(s));
      for (int k = 0; k < pf.n_facets(); ++k) {
        const VectorXd n = pf.facets().row(k).transpose();
        const double h = (n.dot(xb) - pf.offsets()[k]) / n.squaredNorm();
        const VectorXd foot = xb - h * n;
        if ((pf.facets() * foot - pf.offsets()).maxCoeff() <= 1e-12) best = std::min(best, std::abs(h) * n.norm());
      }
    }
  };
  vertex_facet(ha, pb, qb);
  vertex_facet(hb, pa, qa);
  return best;
}

TEST(EnumerateVertices, UnitSquareAndSimplex) {
  const auto box = enumerate_vertices(Polytope::box(vec2(1, 1)), Pose::identity(2));
  ASSERT_EQ(box.size(), 4);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(box.vertex(k).cwiseAbs().sum(), 2.0, 1e-14);

  const Polytope simplex((MatrixXd(3, 2) << -1, 0, 0, -1, 1, 1).finished(), Eigen::Vector3d(0, 0, 1));
  const auto tri = enumerate_vertices(simplex, Pose::identity(2));
  ASSERT_EQ(tri.size(), 3);
  for (const VectorXd& expected : {vec2(0, 0), vec2(1, 0), vec2(0, 1)}) {
    bool found = false;
    for (int k = 0; k < 3; ++k) found = found || (tri.vertex(k) - expected).norm() < 1e-12;
    EXPECT_TRUE(found);
  }
}

TEST(EnumerateVertices, MatchesFacetClippingOracle) {
  Rng rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const Polytope p = random_polytope(rng, 3, 10);
    const auto hull = enumerate_vertices(p, Pose::identity(3));
    const auto other = facet_polygon_vertices(p);
    EXPECT_EQ(hull.size(), static_cast<int>(other.size()));
    for (const auto& x : other) {
      double nearest = std::numeric_limits<double>::infinity();
      for (int k = 0; k < hull.size(); ++k) nearest = std::min(nearest, (hull.vertex(k) - VectorXd(x)).norm());
      EXPECT_LE(nearest, 1e-7);
    }
    EXPECT_LE(((p.facets() * hull.points).colwise() - p.offsets()).maxCoeff(), 1e-9);
  }
}

TEST(ClosestPoints, SeparatedBoxes) {
  const Polytope box = Polytope::box(vec2(1, 1));
  const auto cp = closest_points(enumerate_vertices(box, at2(0, 0)), enumerate_vertices(box, at2(4, 0)));
  EXPECT_NEAR(cp.distance, 2.0, 1e-9);
  EXPECT_NEAR(cp.p_i[0], 1.0, 1e-9);
  EXPECT_NEAR(cp.p_j[0], 3.0, 1e-9);
  EXPECT_NEAR(cp.p_i[1], cp.p_j[1], 1e-9);
}

TEST(ClosestPoints, OverlappingAndSelf) {
  const Polytope box = Polytope::box(vec2(1, 1));
  const auto h = enumerate_vertices(box, at2(0, 0));
  EXPECT_LE(closest_points(h, enumerate_vertices(box, at2(1.5, 0.5))).distance, 1e-5);
  const auto self = closest_points(h, h);
  EXPECT_LE(self.distance, 1e-5);
  EXPECT_LE((self.p_i - self.p_j).norm(), 1e-5);
}

TEST(ClosestPoints, MatchesFeatureEnumeration) {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    const Polytope pa = random_polytope(rng, 3, 8), pb = random_polytope(rng, 3, 8);
    const Pose qa(VectorXd::Zero(3), random_rotation(rng, 3));
    const Pose qb(std::uniform_real_distribution<double>(5.5, 7.0)(rng) * random_unit_vector(rng, 3),
                  random_rotation(rng, 3));
    const auto ha = enumerate_vertices(pa, qa), hb = enumerate_vertices(pb, qb);
    const auto cp = closest_points(ha, hb);
    EXPECT_NEAR(cp.distance, feature_distance(pa, qa, ha, pb, qb, hb), 1e-8) << "trial " << trial;
  }
}

TEST(ClosestPoints, ParallelFacesConvergeQuickly) {
  const Polytope a = Polytope::box(Vector3d(0.5, 0.3, 0.2)), b = Polytope::box(Vector3d(0.4, 0.4, 0.2));
  const auto ha = enumerate_vertices(a, Pose(Vector3d::Zero(), Vector3d(0, 0, 1e-4)));
  const auto hb = enumerate_vertices(b, Pose(Vector3d(0.95, 0.05, 0.01), Vector3d::Zero()));
  const auto cp = closest_points(ha, hb);
  EXPECT_TRUE(cp.converged);
  EXPECT_LE(cp.iterations, 50);
  EXPECT_NEAR(cp.distance, feature_distance(a, Pose(Vector3d::Zero(), Vector3d(0, 0, 1e-4)), ha, b,
                                            Pose(Vector3d(0.95, 0.05, 0.01), Vector3d::Zero()), hb),
              1e-9);
}

TEST(ClosestPoints, TranslationEquivariant) {
  Rng rng(53);
  const Polytope pa = random_polytope(rng, 3, 8), pb = random_polytope(rng, 3, 8);
  const Pose qa(VectorXd::Zero(3), random_rotation(rng, 3)), qb(Vector3d(4, 1, 0), random_rotation(rng, 3));
  const VectorXd shift = Vector3d(-3, 7, 2);
  const double d0 = closest_points(enumerate_vertices(pa, qa), enumerate_vertices(pb, qb)).distance;
  const double d1 = closest_points(enumerate_vertices(pa, Pose(qa.translation + shift, qa.rotation)),
                                   enumerate_vertices(pb, Pose(qb.translation + shift, qb.rotation)))
                        .distance;
  EXPECT_NEAR(d0, d1, 1e-10);
}

TEST(SignedDistance, BoxesSeparatedAndPenetrating) {
  const Polytope box = Polytope::box(vec2(1, 1));
  const auto h0 = enumerate_vertices(box, at2(0, 0));
  const auto sep = enumerate_vertices(box, at2(3, 0)), pen = enumerate_vertices(box, at2(1.5, 0.2));
  EXPECT_NEAR(polytope_signed_distance(box, at2(0, 0), h0, box, at2(3, 0), sep), 1.0, 1e-9);
  EXPECT_NEAR(polytope_signed_distance(box, at2(0, 0), h0, box, at2(1.5, 0.2), pen), -0.5, 1e-9);
}

TEST(BruteForce, SpheresConvergeToAnalytic) {
  const Body s = AnalyticBody::sphere(2, 1.0);
  BruteForceOptions opts;
  opts.n_dirs = 720;
  const auto bf = brute_force_mott(s, at2(0, 0), s, at2(3, 0), opts);
  EXPECT_NEAR(bf.phi, 1.0, 1e-3);
  EXPECT_NEAR(bf.a[0], 1.0, 1e-3);
}

TEST(BruteForce, IdenticalBodiesPenetrate) {
  Rng rng(54);
  const Body b = SuperquadBody::approximate(random_polytope(rng, 2, 6), 3);
  BruteForceOptions opts;
  opts.n_dirs = 720;
  EXPECT_LT(brute_force_mott(b, at2(0.1, 0), b, at2(0.1, 0), opts).phi, 0.0);
}

TEST(BruteForce, RejectsCoarseGrid) {
  const Body s = AnalyticBody::sphere(3, 1.0);
  BruteForceOptions opts;
  opts.n_dirs = 500;
  EXPECT_THROW(brute_force_mott(s, Pose::identity(3), s, Pose(Vector3d(3, 0, 0), Vector3d::Zero()), opts), Error);
}

TEST(BruteForce, AgreesWithStaticSolverBothOrders) {
  Rng rng(55);
  for (int trial = 0; trial < 6; ++trial) {
    const int dim = 2 + trial % 2;
    const Body bi = SuperquadBody::approximate(random_polytope(rng, dim, 7), 3);
    const Body bj = random_ellipsoid(rng, dim, 0.5, 1.2);
    const Pose pi(VectorXd::Zero(dim), random_rotation(rng, dim));
    const Pose pj(3.5 * random_unit_vector(rng, dim), random_rotation(rng, dim));
    const double phi = solve_static_mott(bi, pi, bj, pj).vars.phi;
    EXPECT_NEAR(brute_force_mott(bi, pi, bj, pj).phi, phi, 2e-3);
    EXPECT_NEAR(brute_force_mott(bj, pj, bi, pi).phi, phi, 2e-3);
  }
}

TEST(BruteForce, SignAgreesWithSampling2D) {
  Rng rng(56);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Body bi = SuperquadBody::approximate(random_polytope(rng, 2, 6), 2);
    const Body bj = random_ellipsoid(rng, 2, 0.4, 1.2);
    const Pose pi(VectorXd::Zero(2), random_rotation(rng, 2));
    const Pose pj(std::uniform_real_distribution<double>(0.5, 3.0)(rng) * random_unit_vector(rng, 2),
                  random_rotation(rng, 2));
    BruteForceOptions opts;
    opts.n_dirs = 360;
    const double phi = brute_force_mott(bi, pi, bj, pj, opts).phi;
    if (std::abs(phi) < 2e-2) continue;
    const bool overlap = sampled_penetration(bi, pi, bj, pj, 10000, 1).overlapping ||
                         sampled_penetration(bj, pj, bi, pi, 10000, 2).overlapping;
    EXPECT_EQ(phi <= 0.0, overlap) << "trial " << trial << " phi " << phi;
    ++checked;
  }
  EXPECT_GE(checked, 80);
}

TEST(PercentError, Values) {
  EXPECT_NEAR(percent_error(0.9, 1.0), -10.0, 1e-12);
  EXPECT_EQ(percent_error(1.0, 1.0), 0.0);
  EXPECT_THROW(percent_error(1.0, 0.0), Error);
}

TEST(SampledPenetration, Cases) {
  const Body s = AnalyticBody::sphere(3, 1.0);
  const Pose o = Pose::identity(3);
  EXPECT_FALSE(sampled_penetration(s, o, s, Pose(Vector3d(3, 0, 0), Vector3d::Zero()), 1000).overlapping);
  EXPECT_TRUE(sampled_penetration(s, o, s, o, 1000).overlapping);
  const auto near = sampled_penetration(s, o, s, Pose(Vector3d(2.01, 0, 0), Vector3d::Zero()), 10000);
  EXPECT_FALSE(near.overlapping);
  EXPECT_EQ(near.interior_samples, 10000);
}

}  // namespace
}  // namespace mott
