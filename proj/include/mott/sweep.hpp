#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <future>
#include <random>
#include <thread>
#include <vector>

#include "mott/mott.hpp"
#include "mott/oracle.hpp"
#include "mott/sampling.hpp"

namespace mott {

/// One static scene of the accuracy sweep. phi_accurate is the closest-points
/// distance between the source polytopes.
struct SweepPair {
  Polytope p_i;
  Polytope p_j;
  Pose pose_i;
  Pose pose_j;
  double phi_accurate = 0.0;
};

struct SweepDistribution {
  /// Box half-extents, uniform per axis.
  double min_half_extent = 0.3;
  double max_half_extent = 1.0;
  /// Corner cuts added to each box.
  int max_cuts = 2;
  /// Depth of a cut as a fraction of the box support in the cut direction.
  double cut_depth = 0.15;
  /// Center distance, uniform.
  double min_center_distance = 4.0;
  double max_center_distance = 8.0;
  /// Pairs closer than this are resampled.
  double min_gap = 0.1;
};

/// Axis-aligned box with random half-extents and up to max_cuts planar
/// corner cuts.
inline Polytope random_cut_box(Rng& rng, const SweepDistribution& dist) {
  std::uniform_real_distribution<double> extent(dist.min_half_extent, dist.max_half_extent);
  std::uniform_int_distribution<int> cuts(0, dist.max_cuts);
  const VectorXd h = VectorXd::NullaryExpr(3, [&](Eigen::Index) { return extent(rng); });
  const int n_cuts = cuts(rng);
  MatrixXd a(6 + n_cuts, 3);
  VectorXd b(6 + n_cuts);
  a.topRows(3) = MatrixXd::Identity(3, 3);
  a.middleRows(3, 3) = -MatrixXd::Identity(3, 3);
  b.head(3) = h;
  b.segment(3, 3) = h;
  for (int k = 0; k < n_cuts; ++k) {
    const VectorXd n = random_unit_vector(rng, 3);
    a.row(6 + k) = n.transpose();
    b[6 + k] = (1.0 - dist.cut_depth) * n.cwiseAbs().dot(h);
  }
  return Polytope(a, b);
}

/// Random non-penetrating 3D polytope pairs: cut boxes with random
/// orientations, second body along a random direction.
inline std::vector<SweepPair> sweep_pairs(int n_pairs, std::uint64_t seed, const SweepDistribution& dist = {}) {
  Rng rng(seed);
  std::uniform_real_distribution<double> center(dist.min_center_distance, dist.max_center_distance);
  std::vector<SweepPair> out;
  while (static_cast<int>(out.size()) < n_pairs) {
    SweepPair sp{random_cut_box(rng, dist), random_cut_box(rng, dist),
                 Pose(VectorXd::Zero(3), random_rotation(rng, 3)), Pose(), 0.0};
    sp.pose_j = Pose(random_unit_vector(rng, 3) * center(rng), random_rotation(rng, 3));
    const auto hi = enumerate_vertices(sp.p_i, sp.pose_i);
    const auto hj = enumerate_vertices(sp.p_j, sp.pose_j);
    const auto cp = closest_points(hi, hj);
    if (!cp.converged || cp.distance < dist.min_gap) continue;
    sp.phi_accurate = cp.distance;
    out.push_back(std::move(sp));
  }
  return out;
}

struct SweepRow {
  int rho = 0;
  double mean_solve_ms = 0.0;
  double mean_abs_pct_error = 0.0;
  int n_ok = 0;
  int n_failed = 0;
};

struct SweepSample {
  bool ok = false;
  double phi = 0.0;
  double solve_ms = 0.0;
};

/// Static MOTT on the rho-approximation of one pair. Approximation setup is
/// excluded from the timing.
inline SweepSample sweep_sample(const SweepPair& sp, int rho) {
  SweepSample s;
  try {
    const Body bi = SuperquadBody::approximate(sp.p_i, rho);
    const Body bj = SuperquadBody::approximate(sp.p_j, rho);
    const auto t0 = std::chrono::steady_clock::now();
    const auto sol = solve_static_mott(bi, sp.pose_i, bj, sp.pose_j);
    s.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    s.phi = sol.vars.phi;
    s.ok = true;
  } catch (const Error&) {
    s.ok = false;
  }
  return s;
}

/// Mean solve time and mean |percent error| per rho. Pairs are split across
/// `threads` workers; results are gathered by index so the error column does
/// not depend on scheduling.
inline std::vector<SweepRow> run_sweep(const std::vector<SweepPair>& pairs, const std::vector<int>& rhos,
                                       int threads = 1) {
  require(!rhos.empty(), ErrorKind::InvalidArgument, "rho list must be nonempty");
  for (int r : rhos) require(r >= 1, ErrorKind::InvalidArgument, "rho values must be positive");
  threads = std::max(1, threads);
  std::vector<SweepRow> rows;
  for (int rho : rhos) {
    std::vector<SweepSample> samples(pairs.size());
    std::vector<std::future<void>> jobs;
    for (int w = 0; w < threads; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t k = static_cast<std::size_t>(w); k < pairs.size(); k += static_cast<std::size_t>(threads))
          samples[k] = sweep_sample(pairs[k], rho);
      }));
    for (auto& j : jobs) j.get();
    SweepRow row;
    row.rho = rho;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      if (!samples[k].ok) {
        ++row.n_failed;
        continue;
      }
      ++row.n_ok;
      row.mean_solve_ms += samples[k].solve_ms;
      row.mean_abs_pct_error += std::abs(percent_error(samples[k].phi, pairs[k].phi_accurate));
    }
    if (row.n_ok > 0) {
      row.mean_solve_ms /= row.n_ok;
      row.mean_abs_pct_error /= row.n_ok;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mott
