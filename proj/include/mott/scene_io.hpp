#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mott/oracle.hpp"
#include "mott/trajopt.hpp"

namespace mott {

using Json = nlohmann::json;

namespace io {

inline Error schema(const std::string& what) { return Error(ErrorKind::SchemaError, what); }

inline VectorXd vector_from(const Json& j, const std::string& what) {
  if (!j.is_array()) throw schema(what + " must be an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw schema(what + "[" + std::to_string(k) + "] is not a number");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  }
  return v;
}

inline MatrixXd matrix_from(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw schema(what + " must be a nonempty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const VectorXd row = vector_from(j[r], what + "[" + std::to_string(r) + "]");
    if (static_cast<std::size_t>(row.size()) != cols) throw schema(what + " rows have different lengths");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

inline Json to_json(const VectorXd& v) {
  Json j = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) j.push_back(v[k]);
  return j;
}

inline Json to_json(const MatrixXd& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(VectorXd(m.row(r).transpose())));
  return j;
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw schema(std::string("field '") + key + "' has the wrong type");
  }
}

inline Pose pose_from(const Json& j, int dim, const std::string& what) {
  if (!j.is_object()) throw schema(what + " must be an object");
  const VectorXd t = j.contains("translation") ? vector_from(j["translation"], what + ".translation")
                                               : VectorXd::Zero(dim);
  const VectorXd r = j.contains("rotation") ? vector_from(j["rotation"], what + ".rotation")
                                            : VectorXd::Zero(rotation_size(dim));
  if (t.size() != dim || r.size() != rotation_size(dim))
    throw Error(ErrorKind::DimensionMismatch, what + " does not match the scene dimension");
  return Pose(t, r);
}

inline Json to_json(const Pose& p) { return {{"translation", to_json(p.translation)}, {"rotation", to_json(p.rotation)}}; }

}  // namespace io

inline BodySpec body_from_json(const Json& j, int dim) {
  if (!j.is_object()) throw io::schema("body entries must be objects");
  BodySpec b;
  b.name = io::get_or<std::string>(j, "name", "");
  const std::string where = "body '" + b.name + "'";
  const std::string kind = io::get_or<std::string>(j, "kind", "polytope");
  if (kind == "polytope") {
    b.kind = BodyKind::Polytope;
    if (j.contains("box")) {
      const Polytope box = Polytope::box(io::vector_from(j["box"], where + ".box"));
      b.facets = box.facets();
      b.offsets = box.offsets();
    } else {
      if (!j.contains("facets") || !j.contains("offsets"))
        throw io::schema(where + " needs 'facets' and 'offsets' (or 'box')");
      b.facets = io::matrix_from(j["facets"], where + ".facets");
      b.offsets = io::vector_from(j["offsets"], where + ".offsets");
    }
  } else if (kind == "sphere") {
    b.kind = BodyKind::Sphere;
    b.radius = io::get_or<double>(j, "radius", 0.0);
  } else if (kind == "ellipsoid") {
    b.kind = BodyKind::Ellipsoid;
    if (!j.contains("shape")) throw io::schema(where + " needs 'shape'");
    b.shape = io::matrix_from(j["shape"], where + ".shape");
  } else {
    throw io::schema(where + " has unknown kind '" + kind + "'");
  }
  b.rho = io::get_or<int>(j, "rho", 3);
  b.eta = io::get_or<double>(j, "eta", 1.0);
  b.mobile = io::get_or<bool>(j, "mobile", false);
  b.initial_pose = j.contains("pose") ? io::pose_from(j["pose"], dim, where + ".pose") : Pose::identity(dim);
  if (j.contains("goal")) b.goal_pose = io::pose_from(j["goal"], dim, where + ".goal");
  if (j.contains("approximation")) {
    const Json& a = j["approximation"];
    b.approximation = Approximation{io::vector_from(a.value("ybar", Json::array()), where + ".approximation.ybar"),
                                    io::vector_from(a.value("center", Json::array()), where + ".approximation.center")};
  }
  return b;
}

inline Json to_json(const BodySpec& b) {
  Json j = {{"name", b.name}, {"kind", std::string(to_string(b.kind))}};
  switch (b.kind) {
    case BodyKind::Polytope:
      j["facets"] = io::to_json(b.facets);
      j["offsets"] = io::to_json(b.offsets);
      break;
    case BodyKind::Sphere:
      j["radius"] = b.radius;
      break;
    case BodyKind::Ellipsoid:
      j["shape"] = io::to_json(b.shape);
      break;
  }
  j["rho"] = b.rho;
  j["eta"] = b.eta;
  j["mobile"] = b.mobile;
  j["pose"] = io::to_json(b.initial_pose);
  if (b.goal_pose) j["goal"] = io::to_json(*b.goal_pose);
  if (b.approximation)
    j["approximation"] = {{"ybar", io::to_json(b.approximation->ybar)},
                          {"center", io::to_json(b.approximation->center)}};
  return j;
}

inline Scene scene_from_json(const Json& j) {
  if (!j.is_object()) throw io::schema("scene must be an object");
  Scene s;
  s.name = io::get_or<std::string>(j, "name", "");
  s.dim = io::get_or<int>(j, "dimension", 3);
  if (s.dim != 2 && s.dim != 3) throw io::schema("dimension must be 2 or 3");
  if (!j.contains("bodies") || !j["bodies"].is_array()) throw io::schema("scene needs a 'bodies' array");
  for (const auto& b : j["bodies"]) s.bodies.push_back(body_from_json(b, s.dim));
  if (j.contains("pairs") && !(j["pairs"].is_string() && j["pairs"] == "all")) {
    if (!j["pairs"].is_array()) throw io::schema("'pairs' must be \"all\" or a list of name pairs");
    for (const auto& p : j["pairs"]) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
        throw io::schema("each pair must be two body names");
      s.pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
    }
  }
  s.horizon = io::get_or<int>(j, "horizon", 2);
  if (j.contains("v_max"))
    s.v_max = j["v_max"].is_number() ? VectorXd::Constant(1, j["v_max"].get<double>())
                                     : io::vector_from(j["v_max"], "v_max");
  else
    s.v_max = VectorXd::Constant(1, 0.1);
  s.goal_weight = io::get_or<double>(j, "goal_weight", 1.0);
  s.fix_final = io::get_or<bool>(j, "fix_final", false);
  s.phi_margin = io::get_or<double>(j, "phi_margin", 0.0);
  if (j.contains("solver")) {
    const Json& o = j["solver"];
    s.solver.tol_feas = io::get_or<double>(o, "tol_feas", s.solver.tol_feas);
    s.solver.tol_opt = io::get_or<double>(o, "tol_opt", s.solver.tol_opt);
    s.solver.max_iter = io::get_or<int>(o, "max_iter", s.solver.max_iter);
    s.solver.rho_init = io::get_or<double>(o, "rho_init", s.solver.rho_init);
  }
  validate_scene(s);
  return s;
}

inline Json to_json(const Scene& s) {
  Json j = {{"name", s.name}, {"dimension", s.dim}};
  Json bodies = Json::array();
  for (const auto& b : s.bodies) bodies.push_back(to_json(b));
  j["bodies"] = bodies;
  if (s.pairs.empty()) {
    j["pairs"] = "all";
  } else {
    Json pairs = Json::array();
    for (const auto& [a, b] : s.pairs) pairs.push_back({a, b});
    j["pairs"] = pairs;
  }
  j["horizon"] = s.horizon;
  j["v_max"] = io::to_json(s.v_max);
  j["goal_weight"] = s.goal_weight;
  j["fix_final"] = s.fix_final;
  j["phi_margin"] = s.phi_margin;
  j["solver"] = {{"tol_feas", s.solver.tol_feas},
                 {"tol_opt", s.solver.tol_opt},
                 {"max_iter", s.solver.max_iter},
                 {"rho_init", s.solver.rho_init}};
  return j;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path + "'");
  out << text;
}

inline Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw io::schema(origin + ": " + e.what());
  }
}

inline Scene load_scene(const std::string& path) { return scene_from_json(parse_json(read_file(path), path)); }

inline void save_scene(const Scene& s, const std::string& path) { write_file(path, to_json(s).dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Approximation sidecar: <scene>.approx.json, one entry per polytope keyed by
// name and guarded by a hash of (facets, offsets, eta).

inline std::uint64_t geometry_hash(const BodySpec& b) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&](double v) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<double>(b.facets.rows()));
  mix(static_cast<double>(b.facets.cols()));
  for (Eigen::Index r = 0; r < b.facets.rows(); ++r)
    for (Eigen::Index c = 0; c < b.facets.cols(); ++c) mix(b.facets(r, c));
  for (Eigen::Index k = 0; k < b.offsets.size(); ++k) mix(b.offsets[k]);
  mix(b.eta);
  return h;
}

inline std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string sidecar_path(const std::string& scene_path) { return scene_path + ".approx.json"; }

inline Json sidecar_json(const Scene& s) {
  Json bodies = Json::object();
  for (const auto& b : s.bodies) {
    if (b.kind != BodyKind::Polytope || !b.approximation) continue;
    bodies[b.name] = {{"hash", hex(geometry_hash(b))},
                      {"ybar", io::to_json(b.approximation->ybar)},
                      {"center", io::to_json(b.approximation->center)}};
  }
  return {{"bodies", bodies}};
}

/// Fills approximations from a sidecar; stale or missing entries are skipped.
/// Returns the names of bodies that were filled.
inline std::vector<std::string> apply_sidecar(Scene& s, const Json& j) {
  std::vector<std::string> filled;
  if (!j.is_object() || !j.contains("bodies") || !j["bodies"].is_object())
    throw io::schema("approximation sidecar needs a 'bodies' object");
  for (auto& b : s.bodies) {
    if (b.kind != BodyKind::Polytope || !j["bodies"].contains(b.name)) continue;
    const Json& e = j["bodies"][b.name];
    if (e.value("hash", std::string()) != hex(geometry_hash(b))) continue;
    b.approximation = Approximation{io::vector_from(e.at("ybar"), b.name + ".ybar"),
                                    io::vector_from(e.at("center"), b.name + ".center")};
    filled.push_back(b.name);
  }
  return filled;
}

// ---------------------------------------------------------------------------
// Trajectory CSV: knot, then pose coordinates of each mobile body, then phi of
// each pair. Numbers use %.17g so files round-trip exactly.

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> pose_columns(int dim) {
  if (dim == 2) return {"x", "y", "theta"};
  return {"x", "y", "z", "rx", "ry", "rz"};
}

inline std::vector<std::string> csv_header(const TrajOptSpec& spec) {
  std::vector<std::string> cols{"knot"};
  for (std::size_t b = 0; b < spec.bodies.size(); ++b)
    if (spec.slot[b] >= 0)
      for (const auto& c : pose_columns(spec.dim)) cols.push_back(spec.names[b] + "." + c);
  for (int p = 0; p < spec.n_pairs(); ++p) cols.push_back("phi." + spec.pair_name(p));
  return cols;
}

/// Offsets per knot and pair: from the contact blocks when present,
/// otherwise re-solved statically at each knot.
inline std::vector<std::vector<double>> knot_offsets(const TrajOptSpec& spec, const Trajectory& traj) {
  std::vector<std::vector<double>> out;
  for (int t = 0; t < static_cast<int>(traj.knots.size()); ++t) {
    std::vector<double> row;
    for (int p = 0; p < spec.n_pairs(); ++p) {
      if (!traj.contacts.empty()) {
        row.push_back(traj.contacts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)].phi);
        continue;
      }
      const auto [i, j] = spec.pairs[static_cast<std::size_t>(p)];
      const VectorXd& q = traj.knots[static_cast<std::size_t>(t)];
      double phi = std::numeric_limits<double>::quiet_NaN();
      try {
        phi = solve_static_mott(spec.bodies[static_cast<std::size_t>(i)], spec.pose_of(i, q),
                                spec.bodies[static_cast<std::size_t>(j)], spec.pose_of(j, q))
                  .vars.phi;
      } catch (const Error&) {
      }
      row.push_back(phi);
    }
    out.push_back(std::move(row));
  }
  return out;
}

inline std::string trajectory_csv(const TrajOptSpec& spec, const Trajectory& traj) {
  std::ostringstream os;
  const auto header = csv_header(spec);
  for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << "\n";
  const auto phis = knot_offsets(spec, traj);
  for (std::size_t t = 0; t < traj.knots.size(); ++t) {
    os << t;
    for (Eigen::Index k = 0; k < traj.knots[t].size(); ++k) os << "," << format_double(traj.knots[t][k]);
    for (double phi : phis[t]) os << "," << format_double(phi);
    os << "\n";
  }
  return os.str();
}

/// Knots from a trajectory CSV written for `spec`; phi columns are ignored.
inline std::vector<VectorXd> parse_trajectory_csv(const TrajOptSpec& spec, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw io::schema("trajectory CSV is empty");
  const auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  const auto header = split(line);
  const auto expected = csv_header(spec);
  if (header != expected) throw io::schema("trajectory CSV header does not match the scene");
  std::vector<VectorXd> knots;
  const int nq = spec.q_size();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw io::schema("trajectory CSV row " + std::to_string(knots.size()) + " has " +
                       std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
    if (cells[0] != std::to_string(knots.size()))
      throw io::schema("trajectory CSV knot index out of order at row " + std::to_string(knots.size()));
    VectorXd q(nq);
    for (int k = 0; k < nq; ++k) {
      try {
        std::size_t used = 0;
        q[k] = std::stod(cells[static_cast<std::size_t>(k + 1)], &used);
        if (used != cells[static_cast<std::size_t>(k + 1)].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw io::schema("trajectory CSV cell '" + cells[static_cast<std::size_t>(k + 1)] + "' is not a number");
      }
    }
    knots.push_back(q);
  }
  if (knots.empty()) throw io::schema("trajectory CSV has no knots");
  return knots;
}

// ---------------------------------------------------------------------------
// SVG: 2D scenes draw outlines in the plane; 3D scenes draw xy and xz
// projections side by side. Mobile bodies are drawn at every knot.

namespace detail {

// Boundary samples of a posed body in world frame.
inline MatrixXd outline_points(const BodySpec& spec, const Pose& pose) {
  const int dim = pose.dim();
  MatrixXd local;
  if (spec.kind == BodyKind::Polytope) {
    local = enumerate_vertices(polytope_of(spec), Pose::identity(dim)).points;
  } else {
    const MatrixXd shape = spec.kind == BodyKind::Sphere
                               ? MatrixXd(MatrixXd::Identity(dim, dim) / (spec.radius * spec.radius))
                               : spec.shape;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(shape);
    const MatrixXd map = eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
    std::vector<VectorXd> dirs;
    const int n = 48;
    for (int a = 0; a < n; ++a) {
      const double th = 2.0 * std::numbers::pi * a / n;
      if (dim == 2) {
        dirs.push_back((VectorXd(2) << std::cos(th), std::sin(th)).finished());
      } else {
        for (int b = 1; b < 12; ++b) {
          const double ph = std::numbers::pi * b / 12;
          dirs.push_back(
              (VectorXd(3) << std::sin(ph) * std::cos(th), std::sin(ph) * std::sin(th), std::cos(ph)).finished());
        }
      }
    }
    local.resize(dim, static_cast<Eigen::Index>(dirs.size()));
    for (std::size_t k = 0; k < dirs.size(); ++k) local.col(static_cast<Eigen::Index>(k)) = map * dirs[k];
  }
  return (pose.rotation_matrix() * local).colwise() + pose.translation;
}

// Andrew's monotone chain on the (a, b) coordinates of the points.
inline std::vector<Eigen::Vector2d> hull_2d(const MatrixXd& pts, int a, int b) {
  std::vector<Eigen::Vector2d> p;
  for (Eigen::Index k = 0; k < pts.cols(); ++k) p.emplace_back(pts(a, k), pts(b, k));
  std::sort(p.begin(), p.end(), [](const auto& u, const auto& v) { return u.x() < v.x() || (u.x() == v.x() && u.y() < v.y()); });
  if (p.size() < 3) return p;
  const auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
    return (u - o).x() * (v - o).y() - (u - o).y() * (v - o).x();
  };
  std::vector<Eigen::Vector2d> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], p[i - 1]) <= 0) --k;
    h[k++] = p[i - 1];
  }
  h.resize(k - 1);
  return h;
}

struct SvgShape {
  std::vector<Eigen::Vector2d> pts;
  std::string colour;
  double opacity = 1.0;
};

}  // namespace detail

inline std::string trajectory_svg(const Scene& scene, const TrajOptSpec& spec, const std::vector<VectorXd>& knots) {
  using Shape = detail::SvgShape;
  const std::vector<std::pair<int, int>> panels =
      scene.dim == 2 ? std::vector<std::pair<int, int>>{{0, 1}} : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}};
  std::vector<std::vector<Shape>> drawn(panels.size());
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  for (std::size_t b = 0; b < scene.bodies.size(); ++b) {
    const BodySpec& body = scene.bodies[b];
    std::vector<Pose> poses;
    if (spec.slot[b] < 0) {
      poses.push_back(body.initial_pose);
    } else {
      for (const auto& q : knots) poses.push_back(spec.pose_of(static_cast<int>(b), q));
    }
    const std::string colour = spec.slot[b] < 0 ? "#555555" : palette[spec.slot[b] % 5];
    for (std::size_t k = 0; k < poses.size(); ++k) {
      const MatrixXd pts = detail::outline_points(body, poses[k]);
      const double opacity = spec.slot[b] < 0 ? 0.6 : 0.15 + 0.6 * static_cast<double>(k + 1) / poses.size();
      for (std::size_t pn = 0; pn < panels.size(); ++pn) {
        Shape s{detail::hull_2d(pts, panels[pn].first, panels[pn].second), colour, opacity};
        for (const auto& v : s.pts) {
          lo = lo.cwiseMin(v);
          hi = hi.cwiseMax(v);
        }
        drawn[pn].push_back(std::move(s));
      }
    }
  }
  const double margin = 0.05 * std::max(1e-9, (hi - lo).maxCoeff());
  lo.array() -= margin;
  hi.array() += margin;
  const double panel_px = 400.0;
  const double scale = panel_px / std::max(hi.x() - lo.x(), hi.y() - lo.y());
  const double w = (hi.x() - lo.x()) * scale, h = (hi.y() - lo.y()) * scale;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(w * panels.size() + 10.0 * (panels.size() - 1))
     << "\" height=\"" << format_double(h + 20.0) << "\">\n";
  const char* axis = "xyz";
  for (std::size_t pn = 0; pn < panels.size(); ++pn) {
    const double ox = pn * (w + 10.0);
    os << "<g transform=\"translate(" << format_double(ox) << ",0)\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << format_double(w) << "\" height=\"" << format_double(h)
       << "\" fill=\"none\" stroke=\"#bbbbbb\"/>\n";
    os << "<text x=\"4\" y=\"" << format_double(h + 15.0) << "\" font-size=\"12\">" << axis[panels[pn].first]
       << axis[panels[pn].second] << "</text>\n";
    for (const auto& s : drawn[pn]) {
      os << "<polygon fill=\"" << s.colour << "\" fill-opacity=\"" << format_double(s.opacity * 0.5) << "\" stroke=\""
         << s.colour << "\" stroke-opacity=\"" << format_double(s.opacity) << "\" points=\"";
      for (std::size_t k = 0; k < s.pts.size(); ++k) {
        const double px = (s.pts[k].x() - lo.x()) * scale;
        const double py = (hi.y() - s.pts[k].y()) * scale;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", k ? " " : "", px, py);
        os << buf;
      }
      os << "\"/>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace mott
