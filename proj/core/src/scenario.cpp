#include "mrtraj/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "mrtraj/error.hpp"

namespace mrtraj {

namespace {

using nlohmann::json;

constexpr int kScenarioVersion = 1;

// Normalized distance of `delta` under the spheroid with contact distances
// (a, a, b); 1.0 means touching.
double normalized_distance(const Eigen::VectorXd& delta, double a, double b) {
  double sq = 0.0;
  for (Eigen::Index ax = 0; ax < delta.size(); ++ax) {
    const double scale = ax < 2 ? a : b;
    sq += (delta[ax] / scale) * (delta[ax] / scale);
  }
  return std::sqrt(sq);
}

bool inside(const Workspace& ws, const Eigen::VectorXd& p) {
  return (p.array() >= ws.min.array()).all() && (p.array() <= ws.max.array()).all();
}

std::string row_str(const Eigen::MatrixXd& m, Eigen::Index r) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? ", " : "") << m(r, c);
  os << ")";
  return os.str();
}

void check_separation(const Eigen::MatrixXd& pts, double a, double b, const char* what) {
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pts.rows(); ++j) {
      const Eigen::VectorXd delta = (pts.row(i) - pts.row(j)).transpose();
      if (normalized_distance(delta, a, b) < 1.0) {
        throw ValidationError(std::string(what) + " of robots " + std::to_string(i) + " and " +
                              std::to_string(j) + " are closer than the contact distance");
      }
    }
  }
}

// ---- JSON helpers -------------------------------------------------------

const json& require(const json& obj, const char* field, const std::string& ctx) {
  if (!obj.is_object() || !obj.contains(field)) {
    throw ParseError(ctx + ": missing required field \"" + field + "\"");
  }
  return obj.at(field);
}

double as_number(const json& v, const std::string& ctx) {
  if (!v.is_number()) throw ParseError(ctx + ": expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& ctx) {
  if (!v.is_number_integer()) throw ParseError(ctx + ": expected an integer");
  return v.get<int>();
}

Eigen::VectorXd as_vector(const json& v, Eigen::Index len, const std::string& ctx) {
  if (!v.is_array()) throw ParseError(ctx + ": expected an array");
  if (len >= 0 && static_cast<Eigen::Index>(v.size()) != len) {
    throw ParseError(ctx + ": expected " + std::to_string(len) + " entries, got " +
                     std::to_string(v.size()));
  }
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = as_number(v[i], ctx + "[" + std::to_string(i) + "]");
  }
  return out;
}

Eigen::MatrixXd as_matrix(const json& v, Eigen::Index rows, Eigen::Index cols,
                          const std::string& ctx) {
  if (!v.is_array()) throw ParseError(ctx + ": expected an array of rows");
  if (static_cast<Eigen::Index>(v.size()) != rows) {
    throw ParseError(ctx + ": expected " + std::to_string(rows) + " rows, got " +
                     std::to_string(v.size()));
  }
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    out.row(r) = as_vector(v[r], cols, ctx + "[" + std::to_string(r) + "]").transpose();
  }
  return out;
}

json vec_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json mat_json(const Eigen::MatrixXd& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) arr.push_back(vec_json(m.row(r).transpose()));
  return arr;
}

}  // namespace

// ---- validation -----------------------------------------------------------

void Scenario::validate() const {
  if (n < 1) throw ValidationError("scenario needs at least one robot");
  if (n_d != 2 && n_d != 3) throw ValidationError("n_d must be 2 or 3");
  if ((robot_radii.array() <= 0.0).any()) throw ValidationError("robot radii must be > 0");
  if (starts.rows() != n || starts.cols() != n_d) {
    throw ValidationError("starts must be n x n_d");
  }
  if (goals.rows() != n || goals.cols() != n_d) throw ValidationError("goals must be n x n_d");
  if (workspace.min.size() != n_d || workspace.max.size() != n_d) {
    throw ValidationError("workspace bounds must have n_d entries");
  }
  if ((workspace.min.array() >= workspace.max.array()).any()) {
    throw ValidationError("workspace min must be < max on every axis");
  }
  try {
    horizon.validate();
  } catch (const ConfigError& e) {
    throw ValidationError(std::string("horizon: ") + e.what());
  }
  if (rest_to_rest && horizon.order < 6) {
    throw ValidationError("rest-to-rest boundary conditions need basis order >= 6");
  }
  if (!starts.allFinite() || !goals.allFinite()) {
    throw ValidationError("starts and goals must be finite");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!inside(workspace, starts.row(i).transpose())) {
      throw ValidationError("start " + row_str(starts, i) + " of robot " + std::to_string(i) +
                            " is outside the workspace");
    }
    if (!inside(workspace, goals.row(i).transpose())) {
      throw ValidationError("goal " + row_str(goals, i) + " of robot " + std::to_string(i) +
                            " is outside the workspace");
    }
  }
  check_separation(starts, contact_a(), contact_b(), "starts");
  check_separation(goals, contact_a(), contact_b(), "goals");
  for (std::size_t m = 0; m < obstacles.size(); ++m) {
    const auto& ob = obstacles[m];
    const std::string tag = "obstacle " + std::to_string(m);
    if (ob.center.size() != n_d || ob.velocity.size() != n_d) {
      throw ValidationError(tag + ": center/velocity must have n_d entries");
    }
    if ((ob.radii.array() <= 0.0).any()) throw ValidationError(tag + ": radii must be > 0");
    const Eigen::VectorXd at_start = ob.position_at(0.0);
    const Eigen::VectorXd at_goal = ob.position_at(horizon.duration);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (normalized_distance(starts.row(i).transpose() - at_start, ob.radii[0], ob.radii[2]) <
          1.0) {
        throw ValidationError("start of robot " + std::to_string(i) + " is inside " + tag);
      }
      if (normalized_distance(goals.row(i).transpose() - at_goal, ob.radii[0], ob.radii[2]) <
          1.0) {
        throw ValidationError("goal of robot " + std::to_string(i) + " is inside " + tag);
      }
    }
  }
}

// ---- generation -------------------------------------------------------------

FamilyKind ScenarioFamily::parse_kind(const std::string& name) {
  if (name == "random_box" || name == "box") return FamilyKind::kRandomBox;
  if (name == "circle_antipodal" || name == "circle") return FamilyKind::kCircleAntipodal;
  throw UsageError("unknown scenario family \"" + name + "\"");
}

std::string ScenarioFamily::kind_name(FamilyKind kind) {
  return kind == FamilyKind::kRandomBox ? "random_box" : "circle_antipodal";
}

namespace {

Eigen::VectorXd uniform_point(std::mt19937_64& rng, int n_d, double half_extent) {
  std::uniform_real_distribution<double> dist(-half_extent, half_extent);
  Eigen::VectorXd p(n_d);
  for (int ax = 0; ax < n_d; ++ax) p[ax] = dist(rng);
  return p;
}

bool clear_of(const Eigen::MatrixXd& placed, Eigen::Index count, const Eigen::VectorXd& p,
              double a, double b, double factor) {
  for (Eigen::Index j = 0; j < count; ++j) {
    if (normalized_distance(p - placed.row(j).transpose(), a, b) < factor) return false;
  }
  return true;
}

bool clear_of_obstacles(const std::vector<Obstacle>& obstacles, const Eigen::VectorXd& p,
                        double t, double factor) {
  for (const auto& ob : obstacles) {
    if (normalized_distance(p - ob.position_at(t), ob.radii[0], ob.radii[2]) < factor) {
      return false;
    }
  }
  return true;
}

}  // namespace

Scenario generate(const ScenarioFamily& family, int n, int n_d, std::uint64_t seed) {
  if (n < 1) throw UsageError("robot count must be >= 1");
  if (n_d != 2 && n_d != 3) throw UsageError("n_d must be 2 or 3");
  if (family.robot_radius <= 0.0 || family.clearance_factor < 1.0) {
    throw UsageError("invalid robot radius or clearance factor");
  }

  Scenario scn;
  scn.n = n;
  scn.n_d = n_d;
  scn.robot_radii =
      Eigen::Vector3d(family.robot_radius, family.robot_radius,
                      n_d == 3 ? family.robot_height_radius : family.robot_radius);
  scn.horizon = family.horizon;
  scn.seed = seed;
  scn.starts.resize(n, n_d);
  scn.goals.resize(n, n_d);

  const double a = scn.contact_a();
  const double b = scn.contact_b();
  const double factor = family.clearance_factor;
  std::mt19937_64 rng(seed);

  const double region = family.kind == FamilyKind::kRandomBox ? family.box_half_extent
                                                              : family.circle_radius;
  scn.workspace.min = Eigen::VectorXd::Constant(n_d, -(region + family.workspace_margin));
  scn.workspace.max = Eigen::VectorXd::Constant(n_d, region + family.workspace_margin);

  // Obstacles first so robots can be rejected against them.
  if (family.obstacle_count > 0) {
    std::uniform_real_distribution<double> radius(family.obstacle_radius_min,
                                                  family.obstacle_radius_max);
    for (int m = 0; m < family.obstacle_count; ++m) {
      Obstacle ob;
      ob.center = uniform_point(rng, n_d, region);
      ob.velocity = Eigen::VectorXd::Zero(n_d);
      const double r = radius(rng);
      ob.radii = Eigen::Vector3d(r, r, r);
      scn.obstacles.push_back(std::move(ob));
    }
  }

  if (family.kind == FamilyKind::kCircleAntipodal) {
    const double r = family.circle_radius;
    for (int i = 0; i < n; ++i) {
      const double theta = 2.0 * std::numbers::pi * i / n;
      Eigen::VectorXd p = Eigen::VectorXd::Zero(n_d);
      p[0] = r * std::cos(theta);
      p[1] = r * std::sin(theta);
      scn.starts.row(i) = p.transpose();
      scn.goals.row(i) = -p.transpose();
    }
    for (int i = 0; i < n; ++i) {
      if (!clear_of(scn.starts, i, scn.starts.row(i).transpose(), a, b, factor)) {
        throw GenerationError("circle of radius " + std::to_string(r) + " cannot hold " +
                              std::to_string(n) +
                              " robots: start separation below clearance");
      }
      if (!clear_of_obstacles(scn.obstacles, scn.starts.row(i).transpose(), 0.0, factor) ||
          !clear_of_obstacles(scn.obstacles, scn.goals.row(i).transpose(),
                              scn.horizon.duration, factor)) {
        throw GenerationError("obstacle overlaps a start or goal on the circle");
      }
    }
  } else {
    auto place = [&](Eigen::MatrixXd& pts, double t, const char* what) {
      for (int i = 0; i < n; ++i) {
        bool ok = false;
        for (int attempt = 0; attempt < family.max_attempts && !ok; ++attempt) {
          const Eigen::VectorXd p = uniform_point(rng, n_d, family.box_half_extent);
          if (clear_of(pts, i, p, a, b, factor) &&
              clear_of_obstacles(scn.obstacles, p, t, factor)) {
            pts.row(i) = p.transpose();
            ok = true;
          }
        }
        if (!ok) {
          throw GenerationError(std::string("could not place ") + what + " of robot " +
                                std::to_string(i) + " of " + std::to_string(n) +
                                ": pairwise " + what + " separation >= " +
                                std::to_string(factor * a) + " m violated after " +
                                std::to_string(family.max_attempts) + " attempts");
        }
      }
    };
    place(scn.starts, 0.0, "start");
    place(scn.goals, scn.horizon.duration, "goal");
  }

  scn.validate();
  return scn;
}

// ---- JSON ---------------------------------------------------------------------

nlohmann::json scenario_to_json(const Scenario& scn) {
  json doc;
  doc["version"] = kScenarioVersion;
  doc["n"] = scn.n;
  doc["n_d"] = scn.n_d;
  doc["radii"] = vec_json(scn.robot_radii);
  doc["starts"] = mat_json(scn.starts);
  doc["goals"] = mat_json(scn.goals);
  json obs = json::array();
  for (const auto& ob : scn.obstacles) {
    obs.push_back({{"center", vec_json(ob.center)},
                   {"velocity", vec_json(ob.velocity)},
                   {"radii", vec_json(ob.radii)}});
  }
  doc["obstacles"] = obs;
  doc["workspace"] = {{"min", vec_json(scn.workspace.min)}, {"max", vec_json(scn.workspace.max)}};
  doc["horizon"] = {{"n_xi", scn.horizon.order},
                    {"K", scn.horizon.num_steps - 1},
                    {"T", scn.horizon.duration},
                    {"rest_to_rest", scn.rest_to_rest}};
  doc["seed"] = scn.seed;
  return doc;
}

Scenario scenario_from_json(const nlohmann::json& doc) {
  const std::string ctx = "scenario";
  if (!doc.is_object()) throw ParseError(ctx + ": expected a JSON object");
  const int version = as_int(require(doc, "version", ctx), ctx + ".version");
  if (version != kScenarioVersion) {
    throw ParseError(ctx + ": unsupported version " + std::to_string(version) +
                     " (expected " + std::to_string(kScenarioVersion) + ")");
  }
  Scenario scn;
  scn.n = as_int(require(doc, "n", ctx), ctx + ".n");
  scn.n_d = as_int(require(doc, "n_d", ctx), ctx + ".n_d");
  if (scn.n < 1) throw ValidationError(ctx + ".n must be >= 1");
  if (scn.n_d != 2 && scn.n_d != 3) throw ValidationError(ctx + ".n_d must be 2 or 3");
  scn.robot_radii = as_vector(require(doc, "radii", ctx), 3, ctx + ".radii");
  scn.starts = as_matrix(require(doc, "starts", ctx), scn.n, scn.n_d, ctx + ".starts");
  scn.goals = as_matrix(require(doc, "goals", ctx), scn.n, scn.n_d, ctx + ".goals");

  const json& obs = require(doc, "obstacles", ctx);
  if (!obs.is_array()) throw ParseError(ctx + ".obstacles: expected an array");
  for (std::size_t m = 0; m < obs.size(); ++m) {
    const std::string oc = ctx + ".obstacles[" + std::to_string(m) + "]";
    Obstacle ob;
    ob.center = as_vector(require(obs[m], "center", oc), scn.n_d, oc + ".center");
    ob.velocity = obs[m].contains("velocity")
                      ? as_vector(obs[m].at("velocity"), scn.n_d, oc + ".velocity")
                      : Eigen::VectorXd::Zero(scn.n_d);
    ob.radii = as_vector(require(obs[m], "radii", oc), 3, oc + ".radii");
    scn.obstacles.push_back(std::move(ob));
  }

  const json& ws = require(doc, "workspace", ctx);
  scn.workspace.min = as_vector(require(ws, "min", ctx + ".workspace"), scn.n_d,
                                ctx + ".workspace.min");
  scn.workspace.max = as_vector(require(ws, "max", ctx + ".workspace"), scn.n_d,
                                ctx + ".workspace.max");

  const json& hz = require(doc, "horizon", ctx);
  scn.horizon.order = as_int(require(hz, "n_xi", ctx + ".horizon"), ctx + ".horizon.n_xi");
  scn.horizon.num_steps = as_int(require(hz, "K", ctx + ".horizon"), ctx + ".horizon.K") + 1;
  scn.horizon.duration = as_number(require(hz, "T", ctx + ".horizon"), ctx + ".horizon.T");
  if (hz.contains("rest_to_rest")) {
    if (!hz.at("rest_to_rest").is_boolean()) {
      throw ParseError(ctx + ".horizon.rest_to_rest: expected a boolean");
    }
    scn.rest_to_rest = hz.at("rest_to_rest").get<bool>();
  }
  const json& seed = require(doc, "seed", ctx);
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
    throw ParseError(ctx + ".seed: expected a non-negative integer");
  }
  scn.seed = seed.get<std::uint64_t>();

  scn.validate();
  return scn;
}

std::string dump_json(const nlohmann::json& doc, int indent) { return doc.dump(indent) + "\n"; }

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number for the message.
    const std::string text = buf.str();
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
    throw ParseError(path.string() + ":" + std::to_string(line) + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void save_scenario(const Scenario& scn, const std::filesystem::path& path) {
  write_text_file(path, dump_json(scenario_to_json(scn)));
}

Scenario load_scenario(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  try {
    return scenario_from_json(doc);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace mrtraj
