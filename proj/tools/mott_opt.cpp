// mott-opt: scene ingestion, static MOTT, sweeps, trajectory solving and
// oracle validation from the command line.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mott/sampling.hpp"
#include "mott/scene_io.hpp"
#include "mott/sweep.hpp"

namespace {

using namespace mott;

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitErrorBase = 10;

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string general(double v, int digits = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string vec_str(const VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index k = 0; k < v.size(); ++k) s += (k ? ", " : "") + general(v[k]);
  return s + "]";
}

void emit(const Json& j, const std::string& path) {
  if (path.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_file(path, j.dump(2) + "\n");
}

struct SolverFlags {
  std::optional<double> tol_feas;
  std::optional<double> tol_opt;
  std::optional<int> max_iter;

  void add(CLI::App* cmd) {
    cmd->add_option("--tol-feas", tol_feas, "Feasibility tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--tol-opt", tol_opt, "Optimality tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--max-iter", max_iter, "Outer iteration limit")->check(CLI::PositiveNumber);
  }

  void apply(SolverSettings& s) const {
    if (tol_feas) s.tol_feas = *tol_feas;
    if (tol_opt) s.tol_opt = *tol_opt;
    if (max_iter) s.max_iter = *max_iter;
  }
};

/// Scene with every polytope approximated: sidecar entries first, then
/// on-the-fly computation for anything missing or stale.
Scene load_ready_scene(const std::string& path, std::optional<int> rho) {
  Scene scene = load_scene(path);
  validate_scene(scene);
  if (rho) {
    require(*rho >= 1, ErrorKind::InvalidArgument, "--rho must be positive");
    for (auto& b : scene.bodies) b.rho = *rho;
  }
  const std::string side = sidecar_path(path);
  if (std::filesystem::exists(side)) apply_sidecar(scene, parse_json(read_file(side), side));
  for (auto& b : scene.bodies) {
    if (b.kind != BodyKind::Polytope || b.approximation) continue;
    std::cerr << "note: no current approximation for '" << b.name << "'; computing it (run `mott-opt approximate`"
              << " to cache)\n";
    b.approximation = approximate(b);
  }
  return scene;
}

Json kkt_json(const KktReport& k) {
  return {{"feas_eq", k.feas_eq},
          {"feas_ineq", k.feas_ineq},
          {"stationarity", k.stationarity},
          {"complementarity", k.complementarity}};
}

Json diagnostics_json(const TrajectoryDiagnostics& d) {
  return {{"status", to_string(d.status)},
          {"objective", d.objective},
          {"kkt", kkt_json(d.kkt)},
          {"outer_iterations", d.outer_iterations},
          {"inner_iterations", d.inner_iterations},
          {"wall_time_ms", fixed3(d.wall_time_ms)},
          {"solver_time_ms", fixed3(d.solver_time_ms)},
          {"violations", d.violations}};
}

Json validation_json(const TrajectoryValidation& v) {
  Json pairs = Json::array();
  for (const auto& p : v.pairs) {
    Json e = {{"pair", p.pair},
              {"min_phi", std::isfinite(p.min_phi) ? Json(p.min_phi) : Json(nullptr)},
              {"overlapping_at", p.overlapping_at},
              {"flagged_at", p.flagged_at}};
    if (p.min_polytope_distance) e["min_polytope_distance"] = *p.min_polytope_distance;
    pairs.push_back(std::move(e));
  }
  return {{"pass", v.pass()}, {"pairs", pairs}, {"failures", v.failures}};
}

// ---------------------------------------------------------------------------

struct ApproximateArgs {
  std::string scene;
  std::string body;
  int samples = 10000;
  std::uint64_t seed = 0;
};

int cmd_approximate(const ApproximateArgs& args) {
  Scene scene = load_scene(args.scene);
  validate_scene(scene);
  const std::string side = sidecar_path(args.scene);
  if (std::filesystem::exists(side)) apply_sidecar(scene, parse_json(read_file(side), side));
  if (!args.body.empty()) {
    const int k = scene.find(args.body);
    require(k >= 0, ErrorKind::InvalidArgument, "no body named '" + args.body + "'");
    require(scene.bodies[static_cast<std::size_t>(k)].kind == BodyKind::Polytope, ErrorKind::InvalidArgument,
            "body '" + args.body + "' is not a polytope");
  }
  bool ok = true;
  for (auto& b : scene.bodies) {
    if (b.kind != BodyKind::Polytope || (!args.body.empty() && b.name != args.body)) continue;
    b.approximation = approximate(b);
    const SuperquadBody sq = std::get<SuperquadBody>(make_body(b));
    const auto stats = containment_sampling(sq, args.samples, args.seed);
    std::cout << b.name << ": rho=" << b.rho << " ybar=" << vec_str(b.approximation->ybar)
              << " center=" << vec_str(b.approximation->center) << "\n"
              << "  containment: " << stats.accepted << " interior samples, " << stats.outside
              << " outside the polytope, max violation " << general(stats.max_violation, 3) << "\n";
    if (stats.outside > 0 || stats.accepted < args.samples) ok = false;
  }
  write_file(side, sidecar_json(scene).dump(2) + "\n");
  std::cout << "wrote " << side << "\n";
  return ok ? kExitOk : kExitFailed;
}

// ---------------------------------------------------------------------------

struct MottArgs {
  std::string scene;
  std::vector<std::string> pair;
  std::optional<int> rho;
  std::string out;
};

int cmd_mott(const MottArgs& args) {
  const Scene scene = load_ready_scene(args.scene, args.rho);
  std::vector<std::pair<int, int>> pairs;
  if (args.pair.empty()) {
    pairs = resolve_pairs(scene);
  } else {
    const int i = scene.find(args.pair[0]), j = scene.find(args.pair[1]);
    require(i >= 0 && j >= 0 && i != j, ErrorKind::InvalidArgument, "--pair needs two distinct body names");
    pairs.emplace_back(i, j);
  }
  Json results = Json::array();
  int failures = 0;
  for (const auto& [i, j] : pairs) {
    const BodySpec& si = scene.bodies[static_cast<std::size_t>(i)];
    const BodySpec& sj = scene.bodies[static_cast<std::size_t>(j)];
    const Body bi = make_body(si), bj = make_body(sj);
    const std::string name = si.name + "/" + sj.name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto sol = solve_static_mott(bi, si.initial_pose, bj, sj.initial_pose);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      const auto r = mott_residual(bi, si.initial_pose, bj, sj.initial_pose, sol.vars);
      std::cout << name << ": phi=" << general(sol.vars.phi) << " a=" << vec_str(sol.vars.a)
                << " x_i=" << vec_str(sol.vars.x_i) << " x_j=" << vec_str(sol.vars.x_j) << "\n"
                << "  residual_inf=" << general(r.inf_norm(), 3) << " iterations=" << sol.iterations
                << " wall_ms=" << fixed3(ms) << "\n";
      results.push_back({{"pair", name},
                         {"status", "Converged"},
                         {"phi", sol.vars.phi},
                         {"a", io::to_json(sol.vars.a)},
                         {"x_i", io::to_json(sol.vars.x_i)},
                         {"x_j", io::to_json(sol.vars.x_j)},
                         {"residual_inf", r.inf_norm()},
                         {"uniqueness_margin", sol.uniqueness_margin},
                         {"iterations", sol.iterations},
                         {"wall_time_ms", fixed3(ms)}});
    } catch (const Error& err) {
      ++failures;
      std::cout << name << ": " << to_string(err.kind()) << " (" << err.what() << ")\n";
      results.push_back({{"pair", name}, {"status", to_string(err.kind())}, {"message", err.what()}});
    }
  }
  if (!args.out.empty()) emit({{"scene", scene.name}, {"pairs", results}}, args.out);
  return failures == 0 ? kExitOk : kExitFailed;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  int pairs = 120;
  std::vector<int> rho{1, 3, 5, 7, 9};
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
};

int cmd_sweep(const SweepArgs& args) {
  const int threads =
      args.threads > 0 ? args.threads : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  const auto pairs = sweep_pairs(args.pairs, args.seed);
  const auto rows = run_sweep(pairs, args.rho, threads);
  std::ostringstream csv;
  csv << "rho,mean_solve_ms,mean_abs_pct_error,n_ok,n_failed\n";
  for (const auto& r : rows) {
    char err[64];
    std::snprintf(err, sizeof err, "%.6f", r.mean_abs_pct_error);
    csv << r.rho << "," << fixed3(r.mean_solve_ms) << "," << err << "," << r.n_ok << "," << r.n_failed << "\n";
    if (r.n_failed > 0) std::cerr << "rho=" << r.rho << ": " << r.n_failed << " pair(s) failed and were excluded\n";
  }
  if (args.out.empty())
    std::cout << csv.str();
  else
    write_file(args.out, csv.str());
  bool ok = true;
  for (const auto& r : rows) ok = ok && r.n_ok > 0;
  return ok ? kExitOk : kExitFailed;
}

// ---------------------------------------------------------------------------

struct TrajoptArgs {
  std::string scene;
  std::string out;
  std::string svg;
  std::string report;
  std::optional<int> rho;
  bool bilevel = false;
  bool verbose = false;
  SolverFlags solver;
};

int cmd_trajopt(const TrajoptArgs& args) {
  const Scene scene = load_ready_scene(args.scene, args.rho);
  const TrajOptSpec spec = TrajOptSpec::from_scene(scene);
  require(spec.n_mobile() > 0, ErrorKind::SchemaError, "scene has no mobile bodies");
  SolverSettings settings = scene.solver;
  args.solver.apply(settings);
  std::ostream* log = args.verbose ? &std::cerr : nullptr;
  const Trajectory traj =
      args.bilevel ? solve_trajectory_bilevel(spec, settings, log) : solve_trajectory(spec, settings, log);
  const bool ok = traj.diagnostics.status == NlpStatus::Converged && traj.diagnostics.violations.empty();
  std::cout << (args.bilevel ? "bilevel" : "single-level") << " " << scene.name << ": "
            << to_string(traj.diagnostics.status) << " objective=" << general(traj.diagnostics.objective)
            << " outer=" << traj.diagnostics.outer_iterations << " wall_ms=" << fixed3(traj.diagnostics.wall_time_ms)
            << "\n";
  for (const auto& v : traj.diagnostics.violations) std::cout << "  violation: " << v << "\n";
  if (!args.out.empty()) write_file(args.out, trajectory_csv(spec, traj));
  if (!args.svg.empty()) write_file(args.svg, trajectory_svg(scene, spec, traj.knots));
  std::string report = args.report;
  if (report.empty() && !ok && !args.out.empty()) report = args.out + ".diag.json";
  if (!report.empty()) {
    emit({{"scene", scene.name},
          {"formulation", args.bilevel ? "bilevel" : "single-level"},
          {"diagnostics", diagnostics_json(traj.diagnostics)}},
         report);
    if (!ok) std::cerr << "diagnostics written to " << report << "\n";
  }
  return ok ? kExitOk : kExitFailed;
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
  std::string scene;
  std::string trajectory;
  int upsample = 10;
  int samples = 10000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_validate(const ValidateArgs& args) {
  const Scene scene = load_ready_scene(args.scene, std::nullopt);
  const TrajOptSpec spec = TrajOptSpec::from_scene(scene);
  const auto knots = parse_trajectory_csv(spec, read_file(args.trajectory));
  ValidationOptions opts;
  opts.upsample = args.upsample;
  opts.n_samples = args.samples;
  opts.seed = args.seed;
  const auto v = validate_trajectory(spec, knots, opts);
  Json report = validation_json(v);
  report["scene"] = scene.name;
  report["knots"] = knots.size();
  report["upsample"] = args.upsample;
  report["samples"] = args.samples;
  emit(report, args.out);
  if (!args.out.empty()) std::cout << (v.pass() ? "PASS" : "FAIL") << " " << scene.name << "\n";
  for (const auto& f : v.failures) std::cerr << f << "\n";
  return v.pass() ? kExitOk : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-offset-to-touch collision constraints and trajectory optimization"};
  app.require_subcommand(1);

  ApproximateArgs ap;
  auto* approx = app.add_subcommand("approximate", "Compute and cache superquadratic approximations");
  approx->add_option("--scene", ap.scene, "Scene file")->required()->check(CLI::ExistingFile);
  approx->add_option("--body", ap.body, "Only this body");
  approx->add_option("--samples", ap.samples, "Containment samples per body")->check(CLI::Range(1, 100000000));
  approx->add_option("--seed", ap.seed, "Sampling seed");

  MottArgs mp;
  auto* mott_cmd = app.add_subcommand("mott", "Static MOTT at the scene's initial poses");
  mott_cmd->add_option("--scene", mp.scene, "Scene file")->required()->check(CLI::ExistingFile);
  mott_cmd->add_option("--pair", mp.pair, "Two body names (default: every scene pair)")->expected(2);
  mott_cmd->add_option("--rho", mp.rho, "Override rho for every polytope");
  mott_cmd->add_option("--out", mp.out, "JSON result file");

  SweepArgs sp;
  auto* sweep = app.add_subcommand("distance-sweep", "Accuracy and timing of static MOTT against the polytope oracle");
  sweep->add_option("--pairs", sp.pairs, "Number of random pairs")->check(CLI::PositiveNumber);
  sweep->add_option("--rho", sp.rho, "Comma-separated rho values")->delimiter(',')->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sp.seed, "Geometry seed");
  sweep->add_option("--threads", sp.threads, "Worker threads (default: hardware concurrency)");
  sweep->add_option("--out", sp.out, "CSV file (default: stdout)");

  TrajoptArgs tp;
  auto* traj = app.add_subcommand("trajopt", "Solve the scene's trajectory optimization problem");
  traj->add_option("--scene", tp.scene, "Scene file")->required()->check(CLI::ExistingFile);
  traj->add_option("--out", tp.out, "Trajectory CSV");
  traj->add_option("--svg", tp.svg, "SVG rendering");
  traj->add_option("--report", tp.report, "Diagnostics JSON");
  traj->add_option("--rho", tp.rho, "Override rho for every polytope");
  traj->add_flag("--bilevel", tp.bilevel, "Use the oracle-distance bilevel baseline");
  traj->add_flag("-v,--verbose", tp.verbose, "Solver trace on stderr");
  tp.solver.add(traj);

  ValidateArgs vp;
  auto* validate = app.add_subcommand("validate", "Oracle audit of a trajectory CSV");
  validate->add_option("--scene", vp.scene, "Scene file")->required()->check(CLI::ExistingFile);
  validate->add_option("--trajectory", vp.trajectory, "Trajectory CSV")->required()->check(CLI::ExistingFile);
  validate->add_option("--upsample", vp.upsample, "Poses per knot interval")->check(CLI::PositiveNumber);
  validate->add_option("--samples", vp.samples, "Interior samples per pose")->check(CLI::Range(1000, 100000000));
  validate->add_option("--seed", vp.seed, "Sampling seed");
  validate->add_option("--out", vp.out, "Report JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*approx) return cmd_approximate(ap);
    if (*mott_cmd) return cmd_mott(mp);
    if (*sweep) return cmd_sweep(sp);
    if (*traj) return cmd_trajopt(tp);
    if (*validate) return cmd_validate(vp);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitErrorBase + static_cast<int>(e.kind());
  }
  return kExitUsage;
}
