// Acceptance run: one PASS/FAIL line per criterion. Exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "mott/scene_io.hpp"
#include "mott/sweep.hpp"
#include "support/canned_problems.hpp"
#include "support/finite_difference.hpp"
#include "support/kkt_check.hpp"

namespace mott {
namespace {

// Pinned tolerances.
constexpr double kDerivRelTol = 1e-5;
constexpr double kDerivBudgetS = 5.0;
constexpr double kContainTol = 1e-9;
constexpr int kContainSamples = 10000;
constexpr double kSpherePhiTol = 1e-6;
constexpr int kSweepPairs = 120;
constexpr double kSweepMonotoneSlackPct = 1.0;
constexpr double kSweepHighRhoMaxPct = 5.0;
constexpr double kSweepLowRhoMinPct = 5.0;
constexpr double kSweepMeanSolveMs = 100.0;
constexpr int kOraclePairs = 50;
constexpr double kOracleTol = 2e-3;
constexpr double kOracleBudgetS = 120.0;
constexpr int kSeparatedPairs = 100;
constexpr double kTrajResidualTol = 1e-6;
constexpr double kTrajPhiTol = -1e-6;
constexpr double kTrajBudgetS = 120.0;
constexpr double kBilevelMinBudgetS = 60.0;
constexpr double kBilevelBudgetFactor = 3.0;
constexpr int kCannedCount = 20;
constexpr double kCannedTol = 1e-4;
constexpr double kKktAgreeTol = 1e-10;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct TestBody {
  Polytope poly;
  int dim;
};

std::vector<TestBody> test_polytopes() {
  Rng rng(101);
  std::vector<TestBody> out;
  for (int k = 0; k < 10; ++k) {
    const int dim = 2 + k % 2;
    out.push_back({random_polytope(rng, dim, dim == 2 ? 6 + k % 3 : 8 + k % 4), dim});
  }
  return out;
}

constexpr int kRhos[] = {1, 3, 5, 9};

Verdict derivatives() {
  const auto t0 = Clock::now();
  Rng rng(102);
  double worst = 0.0;
  int points = 0;
  for (const auto& tb : test_polytopes()) {
    for (int rho : kRhos) {
      const Body body = SuperquadBody::approximate(tb.poly, rho);
      const Pose pose(VectorXd::Random(tb.dim), random_rotation(rng, tb.dim));
      const VectorXd c = pose.to_world(body_center(body));
      const auto g = [&](const VectorXd& y) { return eval_g(body, y, pose); };
      const auto grad = [&](const VectorXd& y) { return eval_grad(body, y, pose); };
      for (int k = 0; k < 100; ++k) {
        // Within 5% of the boundary along a random ray.
        const VectorXd xb = ray_boundary(body, pose, c, random_unit_vector(rng, tb.dim), 4.0);
        const double s = std::uniform_real_distribution<double>(0.95, 1.05)(rng);
        const VectorXd x = c + s * (xb - c);
        worst = std::max(worst, testing::relative_error(eval_grad(body, x, pose), testing::fd_gradient(g, x)));
        worst = std::max(worst, testing::relative_error(eval_hess(body, x, pose), testing::fd_jacobian(grad, x)));
        ++points;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kDerivRelTol && secs < kDerivBudgetS,
          fmt("%d points, max rel err %.2e (tol %.0e), %.2f s (limit %.0f s)", points, worst, kDerivRelTol, secs,
              kDerivBudgetS)};
}

Verdict inner_approximation() {
  int outside = 0, accepted = 0;
  double ybar_worst = 0.0;
  for (const auto& tb : test_polytopes()) {
    const VectorXd ybar = facet_bounds(tb.poly);
    const VertexHull hull = enumerate_vertices(tb.poly, Pose::identity(tb.dim));
    const MatrixXd y = (tb.poly.facets() * hull.points).colwise() - tb.poly.offsets();
    for (int v = 0; v < hull.size(); ++v) ybar_worst = std::max(ybar_worst, -(y.col(v) + ybar).minCoeff());
    for (int rho : kRhos) {
      const auto stats =
          containment_sampling(SuperquadBody::approximate(tb.poly, rho), kContainSamples, 103 + rho, kContainTol);
      outside += stats.outside;
      accepted += stats.accepted;
    }
  }
  const bool ok = outside == 0 && accepted == 40 * kContainSamples && ybar_worst <= kContainTol;
  return {ok, fmt("%d interior samples, %d outside polytope (tol %.0e); ybar vertex shortfall %.1e", accepted,
                  outside, kContainTol, ybar_worst)};
}

Verdict spheres() {
  double worst = 0.0;
  int solved = 0;
  const std::pair<double, double> radii[] = {{1.0, 1.0}, {0.6, 0.9}};
  for (int dim : {2, 3}) {
    for (const auto& [ri, rj] : radii) {
      for (double d : {1.5, 2.0, 3.0}) {
        const Body bi = AnalyticBody::sphere(dim, ri), bj = AnalyticBody::sphere(dim, rj);
        VectorXd cj = VectorXd::Zero(dim);
        cj[0] = d;
        const auto sol = solve_static_mott(bi, Pose::identity(dim), bj, Pose(cj, VectorXd::Zero(rotation_size(dim))));
        worst = std::max(worst, std::abs(sol.vars.phi - (d - ri - rj)));
        ++solved;
      }
    }
  }
  return {worst <= kSpherePhiTol, fmt("%d configurations, max |phi - (d - ri - rj)| %.1e (tol %.0e)", solved, worst,
                                      kSpherePhiTol)};
}

Verdict sweep() {
  const auto rows = run_sweep(sweep_pairs(kSweepPairs, 104), {1, 3, 5, 7, 9});
  bool ok = true;
  std::string table;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    table += fmt(" rho=%d: %.2f%% %.3f ms;", r.rho, r.mean_abs_pct_error, r.mean_solve_ms);
    ok = ok && r.n_failed == 0 && r.mean_solve_ms <= kSweepMeanSolveMs;
    if (k > 0) ok = ok && r.mean_abs_pct_error <= rows[k - 1].mean_abs_pct_error + kSweepMonotoneSlackPct;
  }
  ok = ok && rows.back().mean_abs_pct_error <= kSweepHighRhoMaxPct && rows.front().mean_abs_pct_error >= kSweepLowRhoMinPct;
  return {ok, fmt("%d pairs;", kSweepPairs) + table};
}

Verdict oracle_agreement() {
  const auto t0 = Clock::now();
  Rng rng(105);
  double worst = 0.0;
  for (int k = 0; k < kOraclePairs; ++k) {
    const int dim = 2 + k % 2;
    const auto make = [&](int kind) -> Body {
      if (kind == 0) return SuperquadBody::approximate(random_polytope(rng, dim, dim == 2 ? 6 : 9), 1 + 2 * (k % 5));
      return random_ellipsoid(rng, dim, 0.5, 1.2);
    };
    const Body bi = make(k % 3 == 2), bj = make(k % 3 != 0);
    const Pose pi(VectorXd::Zero(dim), random_rotation(rng, dim));
    const double gap = bounding_radius(bi) + bounding_radius(bj) + std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    const Pose pj(gap * random_unit_vector(rng, dim), random_rotation(rng, dim));
    const double phi = solve_static_mott(bi, pi, bj, pj).vars.phi;
    worst = std::max(worst, std::abs(brute_force_mott(bi, pi, bj, pj).phi - phi));
  }
  const double secs = seconds_since(t0);
  return {worst <= kOracleTol && secs < kOracleBudgetS,
          fmt("%d pairs, max |phi - phi_oracle| %.1e (tol %.0e), %.1f s (limit %.0f s)", kOraclePairs, worst,
              kOracleTol, secs, kOracleBudgetS)};
}

Verdict separated_positive() {
  Rng rng(106);
  const SweepDistribution dist;
  int positive = 0;
  double smallest = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kSeparatedPairs; ++k) {
    const int dim = 3;
    const auto make = [&](bool ellipsoid) -> Body {
      if (ellipsoid) return random_ellipsoid(rng, dim, 0.3, 1.2);
      return SuperquadBody::approximate(random_cut_box(rng, dist), std::uniform_int_distribution<int>(1, 9)(rng));
    };
    const Body bi = make(k % 4 == 3), bj = make(k % 2 == 1);
    const Pose pi(VectorXd::Zero(dim), random_rotation(rng, dim));
    const double gap = bounding_radius(bi) + bounding_radius(bj) + std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    const Pose pj(gap * random_unit_vector(rng, dim), random_rotation(rng, dim));
    const double phi = solve_static_mott(bi, pi, bj, pj).vars.phi;
    smallest = std::min(smallest, phi);
    positive += phi > 0.0;
  }
  return {positive == kSeparatedPairs,
          fmt("%d/%d pairs with phi > 0, smallest phi %.3e", positive, kSeparatedPairs, smallest)};
}

TrajOptSpec scene_spec(const std::string& name, SolverSettings& settings) {
  Scene s = load_scene(std::string(MOTT_SCENE_DIR) + "/" + name + ".json");
  approximate_all(s);
  settings = s.solver;
  return TrajOptSpec::from_scene(s);
}

Verdict trajectories() {
  bool ok = true;
  std::string detail;
  double drone_single_s = 0.0;
  for (const char* name : {"freebody", "bookshelf", "drone"}) {
    SolverSettings settings;
    const TrajOptSpec spec = scene_spec(name, settings);
    const auto t0 = Clock::now();
    const Trajectory traj = solve_trajectory(spec, settings);
    const double secs = seconds_since(t0);
    const TrajectoryAudit audit = audit_trajectory(spec, traj, kTrajResidualTol);
    const TrajectoryValidation val = validate_trajectory(spec, traj.knots);
    const bool this_ok = traj.diagnostics.status == NlpStatus::Converged && audit.ok() &&
                         audit.max_mott_residual <= kTrajResidualTol && audit.min_phi >= kTrajPhiTol && val.pass() &&
                         secs <= kTrajBudgetS;
    ok = ok && this_ok;
    detail += fmt("%s%s: %s res %.1e min_phi %.3f %s %.1f s;", detail.empty() ? "" : " ", name, to_string(traj.diagnostics.status).c_str(),
                  audit.max_mott_residual, audit.min_phi, val.pass() ? "separated" : "VALIDATION FAILED", secs);
    if (std::string(name) == "drone") drone_single_s = secs;
  }

  // Bilevel gets a bounded budget; stopping at it still orders the two.
  SolverSettings settings;
  const TrajOptSpec spec = scene_spec("drone", settings);
  settings.time_limit_ms = 1000.0 * std::max(kBilevelMinBudgetS, kBilevelBudgetFactor * drone_single_s);
  const auto t0 = Clock::now();
  const Trajectory bl = solve_trajectory_bilevel(spec, settings);
  const double bilevel_s = seconds_since(t0);
  ok = ok && drone_single_s < bilevel_s;
  detail += fmt(" drone bilevel: %s after %.1f s (single-level %.1f s)", to_string(bl.diagnostics.status).c_str(),
                bilevel_s, drone_single_s);
  return {ok, detail};
}

Verdict canned() {
  const auto problems = testing::canned_problems();
  int solved = 0;
  double worst_kkt = 0.0;
  std::string misses;
  for (int k = 0; k < kCannedCount && k < static_cast<int>(problems.size()); ++k) {
    const auto& cp = problems[static_cast<std::size_t>(k)];
    const NlpProblem p = testing::to_nlp(cp);
    const auto s = solve_nlp(p, testing::start_of(cp));
    const KktReport mine = testing::recompute_kkt(p, s);
    const double kkt_gap = std::max({std::abs(mine.feas_eq - s.kkt.feas_eq), std::abs(mine.feas_ineq - s.kkt.feas_ineq),
                                     std::abs(mine.stationarity - s.kkt.stationarity),
                                     std::abs(mine.complementarity - s.kkt.complementarity)});
    worst_kkt = std::max(worst_kkt, kkt_gap);
    const bool ok = s.status == NlpStatus::Converged && cp.distance_to_optimum(s.x) <= kCannedTol &&
                    std::abs(p.objective(s.x, nullptr) - cp.f_star) <= kCannedTol && kkt_gap <= kKktAgreeTol;
    if (ok)
      ++solved;
    else
      misses += " " + cp.name;
  }
  return {solved == kCannedCount && static_cast<int>(problems.size()) >= kCannedCount,
          fmt("%d/%d solved to %.0e, KKT recomputation gap %.1e", solved, kCannedCount, kCannedTol, worst_kkt) +
              (misses.empty() ? "" : "; failed:" + misses)};
}

}  // namespace
}  // namespace mott

int main() {
  using namespace mott;
  const std::pair<const char*, std::function<Verdict()>> criteria[] = {
      {"1 body derivatives vs central differences", derivatives},
      {"2 inner approximation", inner_approximation},
      {"3 sphere offsets", spheres},
      {"4 distance sweep", sweep},
      {"5 agreement with brute-force oracle", oracle_agreement},
      {"6 separated pairs give positive phi", separated_positive},
      {"7 trajectory scenes", trajectories},
      {"8 NLP regression suite", canned},
  };
  int failed = 0;
  for (const auto& [label, run] : criteria) {
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << label << ": " << v.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
