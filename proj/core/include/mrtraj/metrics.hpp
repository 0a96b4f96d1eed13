#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrtraj/coefficients.hpp"
#include "mrtraj/scenario.hpp"
#include "mrtraj/solver.hpp"

namespace mrtraj {

struct ThresholdHit {
  double threshold = 0.0;
  std::optional<int> iteration;
};

/// Trajectory quality measured on the 10x densified grid.
struct TrajectoryMetrics {
  double smoothness = 0.0;       ///< mean over robots and samples of |p_ddot| (m/s^2)
  double smoothness_cost = 0.0;  ///< 1/2 sum |p_ddot|^2 on the basis grid
  double arc_length = 0.0;       ///< mean per-robot path length (m)
  /// Smallest center distance over pairs and samples; +inf for one robot.
  double min_pairwise_clearance = 0.0;
  /// Smallest |M^-1 (p_i - p_j)|, contact at 1; +inf for one robot.
  double min_normalized_separation = 0.0;
  double avg_pairwise_distance = 0.0;  ///< 0 for one robot
  bool success = false;
  std::vector<ThresholdHit> iterations_to_primal;
};

inline constexpr int kDenseRefine = 10;

/// Geometry-only metrics; `success` and the threshold hits are left default.
TrajectoryMetrics compute_metrics(const TrajectoryCoefficients& coeffs,
                                  const BasisMatrices& basis, const Scenario& scn);

/// Adds solver outcome information to `m`.
void attach_solver_outcome(TrajectoryMetrics& m, const SolverResult& result, double primal_tol,
                           const std::vector<double>& thresholds);

/// Mean acceleration norm on the dense grid.
double smoothness_metric(const TrajectoryCoefficients& coeffs, const BasisMatrices& basis);

/// Non-finite values are written as null.
nlohmann::json metrics_to_json(const TrajectoryMetrics& m);

}  // namespace mrtraj
