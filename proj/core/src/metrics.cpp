#include "mrtraj/metrics.hpp"

#include <cmath>
#include <limits>

#include "mrtraj/error.hpp"

namespace mrtraj {

namespace {

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double mean_norm(const RobotSeries& series) {
  double sum = 0.0;
  Eigen::Index count = 0;
  for (const auto& s : series) {
    sum += s.rowwise().norm().sum();
    count += s.rows();
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace

double smoothness_metric(const TrajectoryCoefficients& coeffs, const BasisMatrices& basis) {
  const Eigen::VectorXd tau = dense_tau(basis.num_steps(), kDenseRefine);
  return mean_norm(evaluate_at(coeffs, basis.duration(), tau, 2));
}

TrajectoryMetrics compute_metrics(const TrajectoryCoefficients& coeffs,
                                  const BasisMatrices& basis, const Scenario& scn) {
  if (coeffs.num_robots() != scn.n || coeffs.dims() != scn.n_d ||
      coeffs.order() != basis.order()) {
    throw ShapeError("coefficients do not match the scenario and basis");
  }
  const Eigen::VectorXd tau = dense_tau(basis.num_steps(), kDenseRefine);
  const RobotSeries pos = evaluate_at(coeffs, basis.duration(), tau, 0);
  const RobotSeries acc = evaluate_at(coeffs, basis.duration(), tau, 2);

  TrajectoryMetrics m;
  m.smoothness = mean_norm(acc);
  for (const auto& a : evaluate(coeffs, basis, 2)) m.smoothness_cost += 0.5 * a.squaredNorm();

  double length = 0.0;
  for (const auto& p : pos) {
    if (p.rows() > 1) {
      length += (p.bottomRows(p.rows() - 1) - p.topRows(p.rows() - 1)).rowwise().norm().sum();
    }
  }
  m.arc_length = scn.n == 0 ? 0.0 : length / scn.n;

  Eigen::VectorXd inv_axes(scn.n_d);
  inv_axes.setConstant(1.0 / scn.contact_a());
  if (scn.n_d == 3) inv_axes[2] = 1.0 / scn.contact_b();

  m.min_pairwise_clearance = std::numeric_limits<double>::infinity();
  m.min_normalized_separation = std::numeric_limits<double>::infinity();
  double dist_sum = 0.0;
  Eigen::Index dist_count = 0;
  for (int i = 0; i < scn.n; ++i) {
    for (int j = i + 1; j < scn.n; ++j) {
      const Eigen::MatrixXd diff = pos[i] - pos[j];
      const Eigen::VectorXd dist = diff.rowwise().norm();
      const Eigen::VectorXd norm_dist = (diff * inv_axes.asDiagonal()).rowwise().norm();
      m.min_pairwise_clearance = std::min(m.min_pairwise_clearance, dist.minCoeff());
      m.min_normalized_separation = std::min(m.min_normalized_separation, norm_dist.minCoeff());
      dist_sum += dist.sum();
      dist_count += dist.size();
    }
  }
  m.avg_pairwise_distance = dist_count == 0 ? 0.0 : dist_sum / static_cast<double>(dist_count);
  return m;
}

void attach_solver_outcome(TrajectoryMetrics& m, const SolverResult& result, double primal_tol,
                           const std::vector<double>& thresholds) {
  m.success = result.final_primal() < primal_tol;
  m.iterations_to_primal.clear();
  for (double t : thresholds) m.iterations_to_primal.push_back({t, result.iterations_to(t)});
}

nlohmann::json metrics_to_json(const TrajectoryMetrics& m) {
  nlohmann::json doc;
  doc["smoothness"] = finite_or_null(m.smoothness);
  doc["smoothness_cost"] = finite_or_null(m.smoothness_cost);
  doc["arc_length"] = finite_or_null(m.arc_length);
  doc["min_pairwise_clearance"] = finite_or_null(m.min_pairwise_clearance);
  doc["min_normalized_separation"] = finite_or_null(m.min_normalized_separation);
  doc["avg_pairwise_distance"] = finite_or_null(m.avg_pairwise_distance);
  doc["success"] = m.success;
  nlohmann::json hits = nlohmann::json::array();
  for (const auto& h : m.iterations_to_primal) {
    hits.push_back({{"threshold", h.threshold},
                    {"iteration", h.iteration ? nlohmann::json(*h.iteration)
                                              : nlohmann::json(nullptr)}});
  }
  doc["iterations_to_primal"] = hits;
  return doc;
}

}  // namespace mrtraj
