#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mrtraj/basis.hpp"

namespace mrtraj {

/// Spheroidal obstacle. `radii` are (a_o, a_o, b_o), already inflated by the
/// robot size, so contact happens at normalized distance 1.
struct Obstacle {
  Eigen::VectorXd center;
  Eigen::VectorXd velocity;
  Eigen::Vector3d radii = Eigen::Vector3d::Constant(0.3);

  /// Position at time t (seconds).
  Eigen::VectorXd position_at(double t) const { return center + velocity * t; }
  bool operator==(const Obstacle&) const = default;
};

struct Workspace {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
  bool operator==(const Workspace&) const = default;
};

/// One planning problem: robots, boundary positions, obstacles and horizon.
struct Scenario {
  int n = 0;
  int n_d = 2;
  /// Half-axes (a/2, a/2, b/2) of the shared robot spheroid.
  Eigen::Vector3d robot_radii = Eigen::Vector3d::Constant(0.1);
  Eigen::MatrixXd starts;  ///< n x n_d
  Eigen::MatrixXd goals;   ///< n x n_d
  std::vector<Obstacle> obstacles;
  Workspace workspace;
  BasisConfig horizon;
  /// Velocity and acceleration pinned to zero at both ends.
  bool rest_to_rest = true;
  std::uint64_t seed = 0;

  /// Inter-robot contact distances (a, b).
  double contact_a() const { return 2.0 * robot_radii[0]; }
  double contact_b() const { return 2.0 * robot_radii[2]; }

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;
  bool operator==(const Scenario&) const = default;
};

enum class FamilyKind { kRandomBox, kCircleAntipodal };

/// Parameters for the scenario generators.
struct ScenarioFamily {
  FamilyKind kind = FamilyKind::kRandomBox;
  double box_half_extent = 1.0;   ///< starts/goals sampled in [-e, e]^n_d
  double circle_radius = 1.0;
  double workspace_margin = 0.5;  ///< workspace = sampling region grown by this
  double robot_radius = 0.1;
  double robot_height_radius = 0.1;  ///< b/2, only used in 3D
  int obstacle_count = 0;
  double obstacle_radius_min = 0.15;  ///< inflated a_o range
  double obstacle_radius_max = 0.3;
  double clearance_factor = 1.05;     ///< min separation / contact distance
  int max_attempts = 10000;
  BasisConfig horizon;

  static FamilyKind parse_kind(const std::string& name);
  static std::string kind_name(FamilyKind kind);
};

/// Deterministic in (family, n, n_d, seed). Throws GenerationError when the
/// density is infeasible within `max_attempts`.
Scenario generate(const ScenarioFamily& family, int n, int n_d, std::uint64_t seed);

nlohmann::json scenario_to_json(const Scenario& scn);
/// Parses and validates. Throws ParseError / ValidationError.
Scenario scenario_from_json(const nlohmann::json& doc);

void save_scenario(const Scenario& scn, const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);

/// Serializes JSON with shortest round-trip float formatting.
std::string dump_json(const nlohmann::json& doc, int indent = 2);
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mrtraj
