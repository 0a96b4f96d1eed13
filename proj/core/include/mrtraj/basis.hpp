#pragma once

#include <Eigen/Dense>

namespace mrtraj {

/// Horizon and polynomial order of the trajectory parametrization.
struct BasisConfig {
  int order = 11;      ///< number of basis functions (n_xi)
  int num_steps = 50;  ///< time samples K+1
  double duration = 5.0;

  /// Throws ConfigError unless order >= 4, num_steps >= order and duration > 0.
  void validate() const;
  bool operator==(const BasisConfig&) const = default;
};

/// Bernstein basis of degree order-1 sampled on a uniform grid over [0, T].
///
/// Row k of `W` evaluates every basis function at `grid[k]`; `Wd` and `Wdd`
/// hold the analytic first and second time derivatives (units 1/s and 1/s^2).
struct BasisMatrices {
  BasisConfig config;
  Eigen::MatrixXd W;
  Eigen::MatrixXd Wd;
  Eigen::MatrixXd Wdd;
  Eigen::VectorXd grid;

  int order() const { return config.order; }
  int num_steps() const { return config.num_steps; }
  double duration() const { return config.duration; }
};

/// Builds the basis on the uniform grid t_k = k T / K.
BasisMatrices build_basis(const BasisConfig& cfg);

/// Evaluates the basis (and derivatives) at arbitrary normalized times
/// tau in [0, 1]. The returned rows follow the same layout as `W`.
/// `derivative` selects W (0), Wd (1) or Wdd (2).
Eigen::MatrixXd evaluate_basis_at(int order, double duration,
                                  const Eigen::VectorXd& tau, int derivative);

/// Uniform grid of `refine * K + 1` normalized samples over [0, 1] used for
/// dense post-hoc checks (clearance, metrics, time scaling).
Eigen::VectorXd dense_tau(int num_steps, int refine = 10);

}  // namespace mrtraj
