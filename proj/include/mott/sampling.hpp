#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "mott/bodies.hpp"

namespace mott {

using Rng = std::mt19937_64;

inline VectorXd random_unit_vector(Rng& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  } while (v.norm() < 1e-8);
  return v.normalized();
}

inline VectorXd random_rotation(Rng& rng, int dim) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  if (dim == 2) return VectorXd::Constant(1, angle(rng));
  return random_unit_vector(rng, 3) * std::abs(angle(rng));
}

/// Polytope from n_facets random half-spaces tangent to (or slightly
/// outside) a ball of radius `radius` around the origin. Resamples until the
/// result lies within the box [-max_extent, max_extent]^dim.
inline Polytope random_polytope(Rng& rng, int dim, int n_facets, double radius = 1.0, double offset_jitter = 0.3,
                                double max_extent = 2.5) {
  std::uniform_real_distribution<double> jitter(0.0, offset_jitter);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    MatrixXd a(n_facets, dim);
    VectorXd b(n_facets);
    for (int k = 0; k < n_facets; ++k) {
      a.row(k) = random_unit_vector(rng, dim).transpose();
      b[k] = radius * (1.0 + jitter(rng));
    }
    try {
      Polytope p(a, b);
      auto [lo, hi] = p.bounding_box();
      if (lo.minCoeff() < -max_extent * radius || hi.maxCoeff() > max_extent * radius) continue;
      return p;
    } catch (const Error&) {
      continue;
    }
  }
  throw Error(ErrorKind::InvalidArgument, "could not sample a bounded polytope");
}

/// Random SPD ellipsoid with semi-axes in [min_axis, max_axis].
inline AnalyticBody random_ellipsoid(Rng& rng, int dim, double min_axis, double max_axis) {
  std::uniform_real_distribution<double> axis(min_axis, max_axis);
  const MatrixXd r = rotation_matrix(random_rotation(rng, dim));
  VectorXd inv_sq(dim);
  for (int i = 0; i < dim; ++i) {
    const double s = axis(rng);
    inv_sq[i] = 1.0 / (s * s);
  }
  MatrixXd q = r * inv_sq.asDiagonal() * r.transpose();
  q = 0.5 * (q + q.transpose());
  return AnalyticBody::ellipsoid(q);
}

struct ContainmentStats {
  /// Samples with g <= 0.
  int accepted = 0;
  /// Accepted samples outside the source polytope by more than tol.
  int outside = 0;
  double max_violation = 0.0;
};

/// Rejection-samples the approximation's interior and checks every accepted
/// point against the source polytope.
inline ContainmentStats containment_sampling(const SuperquadBody& body, int n_samples, std::uint64_t seed = 0,
                                             double tol = 1e-9) {
  Rng rng(seed);
  const auto [lo, hi] = body.bounding_box();
  std::vector<std::uniform_real_distribution<double>> coord;
  for (int d = 0; d < body.dim(); ++d) coord.emplace_back(lo[d], hi[d]);
  ContainmentStats out;
  VectorXd x(body.dim());
  for (long long draw = 0; draw < 1000LL * n_samples && out.accepted < n_samples; ++draw) {
    for (int d = 0; d < body.dim(); ++d) x[d] = coord[static_cast<std::size_t>(d)](rng);
    if (body.g_local(x) > 0.0) continue;
    ++out.accepted;
    const double v = (body.facets() * x - body.offsets()).maxCoeff();
    out.max_violation = std::max(out.max_violation, v);
    if (v > tol) ++out.outside;
  }
  return out;
}

}  // namespace mott
