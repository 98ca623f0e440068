#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mott/bodies.hpp"

namespace mott {

enum class BodyKind { Polytope, Sphere, Ellipsoid };

inline std::string_view to_string(BodyKind k) {
  switch (k) {
    case BodyKind::Polytope: return "polytope";
    case BodyKind::Sphere: return "sphere";
    case BodyKind::Ellipsoid: return "ellipsoid";
  }
  return "unknown";
}

/// Precomputed superquadratic data for one polytope.
struct Approximation {
  VectorXd ybar;
  VectorXd center;
};

struct BodySpec {
  std::string name;
  BodyKind kind = BodyKind::Polytope;
  MatrixXd facets;
  VectorXd offsets;
  double radius = 0.0;
  MatrixXd shape;
  int rho = 3;
  double eta = 1.0;
  bool mobile = false;
  Pose initial_pose;
  std::optional<Pose> goal_pose;
  std::optional<Approximation> approximation;
};

struct SolverSettings {
  double tol_feas = 1e-6;
  double tol_opt = 1e-5;
  int max_iter = 50;
  double rho_init = 1000.0;
  /// Wall-clock budget for one solve; not serialized.
  double time_limit_ms = std::numeric_limits<double>::infinity();
};

struct Scene {
  std::string name;
  int dim = 3;
  std::vector<BodySpec> bodies;
  /// Empty means every pair with at least one mobile body.
  std::vector<std::pair<std::string, std::string>> pairs;
  int horizon = 2;
  /// One entry (broadcast) or one per configuration coordinate.
  VectorXd v_max;
  double goal_weight = 1.0;
  bool fix_final = false;
  /// Lower bound imposed on every knot offset phi.
  double phi_margin = 0.0;
  SolverSettings solver;

  int find(const std::string& body) const {
    for (std::size_t k = 0; k < bodies.size(); ++k)
      if (bodies[k].name == body) return static_cast<int>(k);
    return -1;
  }
};

namespace detail {
inline bool same(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}
inline bool same(const std::optional<Pose>& a, const std::optional<Pose>& b) {
  return a.has_value() == b.has_value() && (!a || *a == *b);
}
}  // namespace detail

inline bool operator==(const Approximation& a, const Approximation& b) {
  return detail::same(a.ybar, b.ybar) && detail::same(a.center, b.center);
}

inline bool operator==(const BodySpec& a, const BodySpec& b) {
  return a.name == b.name && a.kind == b.kind && detail::same(a.facets, b.facets) &&
         detail::same(a.offsets, b.offsets) && a.radius == b.radius && detail::same(a.shape, b.shape) &&
         a.rho == b.rho && a.eta == b.eta && a.mobile == b.mobile && a.initial_pose == b.initial_pose &&
         detail::same(a.goal_pose, b.goal_pose) && a.approximation == b.approximation;
}

inline bool operator==(const SolverSettings& a, const SolverSettings& b) {
  return a.tol_feas == b.tol_feas && a.tol_opt == b.tol_opt && a.max_iter == b.max_iter &&
         a.rho_init == b.rho_init;
}

inline bool operator==(const Scene& a, const Scene& b) {
  return a.name == b.name && a.dim == b.dim && a.bodies == b.bodies && a.pairs == b.pairs &&
         a.horizon == b.horizon && detail::same(a.v_max, b.v_max) && a.goal_weight == b.goal_weight &&
         a.fix_final == b.fix_final && a.phi_margin == b.phi_margin && a.solver == b.solver;
}

inline Polytope polytope_of(const BodySpec& spec) {
  require(spec.kind == BodyKind::Polytope, ErrorKind::InvalidArgument, "body '" + spec.name + "' is not a polytope");
  return Polytope(spec.facets, spec.offsets);
}

/// Facet bounds (inflated by eta) and Chebyshev center of a polytope body.
inline Approximation approximate(const BodySpec& spec) {
  require(spec.eta >= 1.0, ErrorKind::InvalidArgument, "body '" + spec.name + "': eta must be >= 1");
  const Polytope p = polytope_of(spec);
  return {spec.eta * facet_bounds(p), chebyshev_center(p).center};
}

inline void approximate_all(Scene& scene) {
  for (auto& b : scene.bodies)
    if (b.kind == BodyKind::Polytope) b.approximation = approximate(b);
}

/// Collision geometry for a body. Polytopes need their approximation.
inline Body make_body(const BodySpec& spec) {
  switch (spec.kind) {
    case BodyKind::Sphere:
      return AnalyticBody::sphere(static_cast<int>(spec.initial_pose.dim()), spec.radius);
    case BodyKind::Ellipsoid:
      return AnalyticBody::ellipsoid(spec.shape);
    case BodyKind::Polytope:
      break;
  }
  if (!spec.approximation)
    throw Error(ErrorKind::ApproximationMissing, "polytope '" + spec.name + "' has no facet bounds");
  return SuperquadBody(polytope_of(spec), spec.rho, spec.approximation->ybar, spec.approximation->center);
}

/// Body index pairs, explicit or defaulted.
inline std::vector<std::pair<int, int>> resolve_pairs(const Scene& scene) {
  std::vector<std::pair<int, int>> out;
  if (scene.pairs.empty()) {
    const int n = static_cast<int>(scene.bodies.size());
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (scene.bodies[i].mobile || scene.bodies[j].mobile) out.emplace_back(i, j);
    return out;
  }
  for (const auto& [a, b] : scene.pairs) {
    const int i = scene.find(a), j = scene.find(b);
    require(i >= 0, ErrorKind::SchemaError, "pair references unknown body '" + a + "'");
    require(j >= 0, ErrorKind::SchemaError, "pair references unknown body '" + b + "'");
    require(i != j, ErrorKind::SchemaError, "pair '" + a + "' with itself");
    out.emplace_back(i, j);
  }
  return out;
}

/// Structural checks independent of any command.
inline void validate_scene(const Scene& scene) {
  require(scene.dim == 2 || scene.dim == 3, ErrorKind::SchemaError, "dimension must be 2 or 3");
  std::set<std::string> names;
  for (const auto& b : scene.bodies) {
    require(!b.name.empty(), ErrorKind::SchemaError, "body name must be nonempty");
    require(names.insert(b.name).second, ErrorKind::SchemaError, "duplicate body name '" + b.name + "'");
    require(b.initial_pose.dim() == scene.dim, ErrorKind::DimensionMismatch,
            "body '" + b.name + "' pose dimension differs from scene");
    require(!b.goal_pose || b.goal_pose->dim() == scene.dim, ErrorKind::DimensionMismatch,
            "body '" + b.name + "' goal pose dimension differs from scene");
    switch (b.kind) {
      case BodyKind::Polytope:
        require(b.facets.cols() == scene.dim && b.offsets.size() == b.facets.rows(), ErrorKind::DimensionMismatch,
                "body '" + b.name + "' facet shape does not match scene dimension");
        require(!b.approximation || (b.approximation->ybar.size() == b.facets.rows() &&
                                     b.approximation->center.size() == scene.dim),
                ErrorKind::DimensionMismatch, "body '" + b.name + "' approximation has wrong size");
        break;
      case BodyKind::Sphere:
        require(b.radius > 0.0, ErrorKind::SchemaError, "body '" + b.name + "' radius must be positive");
        break;
      case BodyKind::Ellipsoid:
        require(b.shape.rows() == scene.dim && b.shape.cols() == scene.dim, ErrorKind::DimensionMismatch,
                "body '" + b.name + "' shape matrix does not match scene dimension");
        break;
    }
  }
  resolve_pairs(scene);
  require(scene.horizon >= 1, ErrorKind::SchemaError, "horizon must be >= 1");
}

}  // namespace mott
