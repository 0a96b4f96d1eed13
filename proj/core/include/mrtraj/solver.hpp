#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrtraj/coefficients.hpp"
#include "mrtraj/constraints.hpp"

namespace mrtraj {

/// Quadratic objective of the filter.
///
/// Projection: 1/2 |xi_bar - target|^2 (Q = I, q = -target).
/// Smoothness: 1/2 sum |p_ddot|^2 on the grid (Q = I (x) Wdd^T Wdd, q = 0).
struct ObjectiveMode {
  enum class Kind { kProjection, kSmoothness };
  Kind kind = Kind::kProjection;
  Eigen::MatrixXd target;  ///< stacked coefficients, projection only

  static ObjectiveMode projection(const TrajectoryCoefficients& target);
  static ObjectiveMode projection(Eigen::MatrixXd stacked_target);
  static ObjectiveMode smoothness();
};

struct SolverConfig {
  double rho = 1.0;
  int max_iters = 15000;
  double primal_tol = 1e-3;
  double fp_tol = 1e-8;
  double d_max = 1e6;
  /// Stop as soon as the primal residual drops below primal_tol. When false
  /// the solver runs until the fixed-point criterion or max_iters.
  bool stop_on_primal = true;

  void validate() const;
};

struct TraceEntry {
  double primal = 0.0;       ///< primal residual of the iterate entering the step
  double fixed_point = 0.0;  ///< |(xi, lambda)_{l+1} - (xi, lambda)_l|^2
};

/// Iterate of the fixed-point map. `xi`, `lambda` are stacked (vars x n_d);
/// `slack` is (g_rows x n_d).
struct SolverState {
  Eigen::MatrixXd xi;
  Eigen::MatrixXd lambda;
  Eigen::MatrixXd slack;
  SphericalVars vars;
  int iter = 0;
  std::vector<TraceEntry> trace;

  TrajectoryCoefficients coefficients(int num_robots, int order) const {
    return TrajectoryCoefficients::from_stacked(xi, num_robots, order);
  }
};

enum class SolveStatus { kConvergedPrimal, kConvergedFixedPoint, kMaxIters };
std::string to_string(SolveStatus status);

struct SolverResult {
  SolverState state;
  SolveStatus status = SolveStatus::kMaxIters;

  double final_primal() const;
  /// First iteration whose primal residual is below `threshold`.
  std::optional<int> iterations_to(double threshold) const;
};

/// Null-space factorization of the xi-step KKT system
///   [[Q + rho F^T F + rho G^T G, A^T], [A, 0]]
/// stored as the affine map xi = X eta + x0. Shared read-only by every
/// batch member built on the same system and objective kind.
class KktCache {
 public:
  KktCache(const ConstraintSystem& sys, ObjectiveMode::Kind kind, double rho);

  ObjectiveMode::Kind kind() const { return kind_; }
  double rho() const { return rho_; }
  const Eigen::MatrixXd& hessian() const { return hessian_; }
  const Eigen::MatrixXd& solve_map() const { return X_; }
  const Eigen::MatrixXd& offset() const { return x0_; }

  /// Solves for a stacked set of right-hand sides. `eta` holds n_d columns
  /// per member; the result keeps the same layout. Each output column is
  /// computed independently of the others, so batching is bit-identical to
  /// solving members one by one.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& eta) const;

 private:
  ObjectiveMode::Kind kind_;
  double rho_;
  int n_d_;
  Eigen::MatrixXd hessian_;
  Eigen::MatrixXd X_;
  Eigen::MatrixXd x0_;  ///< vars x n_d
};

// ---- alternating-minimization sub-steps (exposed for verification) --------

/// Separation row values of alpha, beta, d covering pair rows then obstacle rows.
struct RowVars {
  Eigen::VectorXd alpha, beta, d;
};
RowVars to_rows(const SphericalVars& vars);
SphericalVars from_rows(const ConstraintSystem& sys, const RowVars& rows);

/// alpha = atan2(dy, dx); 0 for a zero planar component.
Eigen::VectorXd am_alpha_step(const Eigen::MatrixXd& deltas);
/// Exact minimizer over beta in [0, pi] of the separation penalty with alpha
/// and d held fixed. pi/2 in 2D.
Eigen::VectorXd am_beta_step(const ConstraintSystem& sys, const Eigen::MatrixXd& deltas,
                             const Eigen::VectorXd& alpha, const Eigen::VectorXd& d);
/// Exact minimizer over d in [1, d_max] with alpha and beta held fixed.
Eigen::VectorXd am_d_step(const ConstraintSystem& sys, const Eigen::MatrixXd& deltas,
                          const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                          double d_max);

/// Augmented Lagrangian value for the given primal/auxiliary variables.
double augmented_lagrangian(const ConstraintSystem& sys, const ObjectiveMode& mode, double rho,
                            const Eigen::MatrixXd& xi, const SphericalVars& vars,
                            const Eigen::MatrixXd& slack, const Eigen::MatrixXd& lambda);

/// |F xi - e|_2 + |max(0, G xi - h)|_2 with e from the clipped spherical
/// extraction of xi itself.
double primal_residual(const ConstraintSystem& sys, const Eigen::MatrixXd& xi,
                       double d_max = 1e6);
double primal_residual(const SolverState& state, const ConstraintSystem& sys,
                       double d_max = 1e6);

/// Squared norm of the (xi, lambda) change between consecutive iterates.
double fixed_point_residual(const SolverState& prev, const SolverState& next);

/// Cold start: given coefficients, lambda = 0, vars extracted from xi.
SolverState initial_state(const ConstraintSystem& sys, const TrajectoryCoefficients& init,
                          double d_max = 1e6);
/// Warm start with an explicit multiplier (same layout as the coefficients).
SolverState initial_state(const ConstraintSystem& sys, const TrajectoryCoefficients& init,
                          const TrajectoryCoefficients& lambda, double d_max = 1e6);

/// Fixed-point solver bound to one constraint system and objective kind.
class FixedPointSolver {
 public:
  FixedPointSolver(std::shared_ptr<const ConstraintSystem> sys, ObjectiveMode::Kind kind,
                   SolverConfig cfg);

  const ConstraintSystem& system() const { return *sys_; }
  const SolverConfig& config() const { return cfg_; }
  const KktCache& kkt() const { return *kkt_; }

  /// One application of the fixed-point map.
  SolverState step(const SolverState& state, const ObjectiveMode& mode) const;
  SolverResult solve(SolverState init, const ObjectiveMode& mode) const;
  /// Runs members in lock step; xi-steps are one stacked product against the
  /// shared factorization. Results equal independent `solve` calls.
  std::vector<SolverResult> solve_batch(std::vector<SolverState> inits,
                                        const std::vector<ObjectiveMode>& modes) const;

  /// Advances every member of `states` by one step in place.
  void step_batch(std::vector<SolverState>& states,
                  const std::vector<const ObjectiveMode*>& modes) const;

 private:
  void check_member(const SolverState& state, const ObjectiveMode& mode) const;

  std::shared_ptr<const ConstraintSystem> sys_;
  ObjectiveMode::Kind kind_;
  SolverConfig cfg_;
  std::shared_ptr<const KktCache> kkt_;
};

/// Convenience wrapper: builds a solver and runs one member.
SolverResult solve(const SolverState& init, const ConstraintSystem& sys,
                   const ObjectiveMode& mode, const SolverConfig& cfg);

/// Trace as CSV with header "iter,primal,fixed_point".
std::string trace_csv(const std::vector<TraceEntry>& trace);
void write_trace_csv(const std::vector<TraceEntry>& trace, const std::filesystem::path& path);

}  // namespace mrtraj
