#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "mrtraj/basis.hpp"
#include "mrtraj/coefficients.hpp"
#include "mrtraj/scenario.hpp"

namespace mrtraj {

struct RobotPair {
  int i = 0;
  int j = 0;
  bool operator==(const RobotPair&) const = default;
};

struct RobotObstacle {
  int robot = 0;
  int obstacle = 0;
  bool operator==(const RobotObstacle&) const = default;
};

/// Dimension bookkeeping for one assembled system. Everything that is "per
/// axis" is identical across axes, so the solver handles one axis block and
/// reuses it n_d times.
struct SystemDims {
  int n = 0;
  int n_d = 0;
  int order = 0;
  int steps = 0;
  int n_obs = 0;
  int pairs = 0;

  int vars_per_axis() const { return n * order; }
  int pair_rows() const { return pairs * steps; }
  int obstacle_rows() const { return n * n_obs * steps; }
  int f_rows_per_axis() const { return pair_rows() + obstacle_rows(); }
  int g_rows_per_axis() const { return 2 * n * steps; }
  int eq_rows_per_robot = 2;
  int eq_rows_per_axis() const { return n * eq_rows_per_robot; }
  bool operator==(const SystemDims&) const = default;
};

/// Angles and normalized distances of the spherical reformulation.
///
/// Pair rows are indexed `p * steps + k` following `pair_index`; obstacle
/// rows `q * steps + k` following `obstacle_index`.
struct SphericalVars {
  Eigen::VectorXd alpha, beta, d;
  Eigen::VectorXd alpha_o, beta_o, d_o;
};

/// Compact constraint system for one scenario: boundary equalities A xi = b_eq,
/// workspace box G xi <= h and the separation equalities F xi = e.
///
/// Matrices are stored per axis (A_axis, F_axis, G_axis act on one column of
/// the stacked coefficients); `full_*` rebuild the block-diagonal forms.
struct ConstraintSystem {
  SystemDims dims;
  BasisMatrices basis;
  double a = 0.2;  ///< robot contact distance in the x-y plane
  double b = 0.2;  ///< robot contact distance along z
  double margin = 0.0;  ///< peak relative inflation of the separation rows
  std::vector<RobotPair> pair_index;
  std::vector<RobotObstacle> obstacle_index;
  Eigen::MatrixXd obstacle_axes;       ///< n_obs x 2: (a_o, b_o)
  Eigen::MatrixXd obstacle_positions;  ///< (n_obs * steps) x n_d, row m*steps+k

  Eigen::MatrixXd A_axis;  ///< eq_rows_per_axis x vars_per_axis
  Eigen::MatrixXd b_eq;    ///< eq_rows_per_axis x n_d
  Eigen::SparseMatrix<double, Eigen::RowMajor> F_axis;
  Eigen::SparseMatrix<double, Eigen::RowMajor> G_axis;
  Eigen::MatrixXd h;  ///< g_rows_per_axis x n_d
  /// Contact axes (a_row, b_row) of every separation row including the
  /// margin profile, f_rows x 2.
  Eigen::MatrixXd separation_axes;

  /// Robot-selection difference operator (pairs x n) before the Kronecker
  /// product with W.
  Eigen::MatrixXd pair_selection() const;

  /// True when spheroids are spheres (or the workspace is planar), so the
  /// normalized-space extraction coincides with the alternating steps.
  bool isotropic() const;

  Eigen::MatrixXd full_A() const;
  Eigen::VectorXd full_b() const;
  Eigen::MatrixXd full_F() const;
  Eigen::MatrixXd full_G() const;
  Eigen::VectorXd full_h() const;
};

/// Builds the system. Throws ShapeError when the basis does not match the
/// scenario horizon. A single robot without obstacles yields a system with
/// no separation rows; that is valid and only carries the boundary rows.
///
/// `separation_margin` inflates every contact distance (robot pairs and
/// obstacles) at grid time t by 1 + margin * sin^2(pi t / T). Separation is
/// only enforced on the grid and the chord between two samples cuts inside
/// the contact ellipsoid by an amount growing with relative speed; the
/// profile vanishes at both ends, where robots rest at their fixed
/// boundary positions.
ConstraintSystem assemble(const Scenario& scn, const BasisMatrices& basis,
                          double separation_margin = 0.0);

/// Obstacle-row offsets: the obstacle position at each step, zero on pair rows.
Eigen::MatrixXd separation_offsets(const ConstraintSystem& sys);

/// F xi for stacked coefficients (vars_per_axis x n_d) -> (f_rows x n_d).
Eigen::MatrixXd apply_F(const ConstraintSystem& sys, const Eigen::MatrixXd& xi);
/// F^T r for r of shape (f_rows x n_d) -> (vars_per_axis x n_d).
Eigen::MatrixXd apply_Ft(const ConstraintSystem& sys, const Eigen::MatrixXd& r);
/// Positions of every robot on the grid: (steps x n) per axis, returned as
/// (steps*n) x n_d with row i*steps + k.
Eigen::MatrixXd grid_positions(const ConstraintSystem& sys, const Eigen::MatrixXd& xi);
/// G xi - h, shape (g_rows x n_d).
Eigen::MatrixXd workspace_gap(const ConstraintSystem& sys, const Eigen::MatrixXd& xi);
/// G^T v for v of shape (g_rows x n_d).
Eigen::MatrixXd apply_Gt(const ConstraintSystem& sys, const Eigen::MatrixXd& v);

/// Separation targets e(alpha, beta, d), shape (f_rows x n_d), axis per column.
/// Flattening column-major gives the axis-major stacking of F's rows.
Eigen::MatrixXd compute_e(const ConstraintSystem& sys, const SphericalVars& vars);

/// Relative vectors seen by each separation row: F xi - offsets.
Eigen::MatrixXd separation_deltas(const ConstraintSystem& sys, const Eigen::MatrixXd& xi);

/// Spherical coordinates of every separation row: alpha = atan2(dy, dx),
/// beta = atan2(|(dx/a, dy/a)|, dz/b), d = |M^-1 delta| clipped to [1, d_max].
/// Coincident points map to alpha = 0, beta = pi/2, d = 1.
SphericalVars extract_spherical(const ConstraintSystem& sys, const Eigen::MatrixXd& deltas,
                                double d_max = 1e6);

/// Convenience overload taking per-robot position series on the basis grid.
SphericalVars extract_spherical(const ConstraintSystem& sys, const RobotSeries& positions,
                                double d_max = 1e6);

/// Contact axes (a_row, b_row) of every separation row, f_rows x 2.
const Eigen::MatrixXd& row_axes(const ConstraintSystem& sys);
/// Per-step contact scale 1 + margin * sin^2(pi t_k / T).
Eigen::VectorXd margin_profile(const BasisMatrices& basis, double margin);

}  // namespace mrtraj
