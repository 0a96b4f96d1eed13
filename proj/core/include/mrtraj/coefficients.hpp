#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mrtraj/basis.hpp"

namespace mrtraj {

/// Polynomial coefficients of every robot and axis.
///
/// Storage is robot-major then axis (index ((i * n_d) + axis) * n_xi + j),
/// which is the layout of candidate and dataset files. The solver works on
/// the axis-stacked form instead: a (n * n_xi) x n_d matrix whose column
/// `axis` is (xi_{1,axis}, ..., xi_{n,axis}).
class TrajectoryCoefficients {
 public:
  TrajectoryCoefficients() = default;
  TrajectoryCoefficients(int num_robots, int dims, int order);
  TrajectoryCoefficients(int num_robots, int dims, int order, std::vector<double> flat);

  int num_robots() const { return n_; }
  int dims() const { return nd_; }
  int order() const { return nxi_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int robot, int axis, int j) { return data_[index(robot, axis, j)]; }
  double operator()(int robot, int axis, int j) const { return data_[index(robot, axis, j)]; }

  std::span<const double> flat() const { return data_; }
  std::span<double> flat() { return data_; }

  /// Axis-stacked form used by the solver.
  Eigen::MatrixXd stacked() const;
  static TrajectoryCoefficients from_stacked(const Eigen::MatrixXd& stacked, int num_robots,
                                             int order);

  bool all_finite() const;
  bool same_shape(const TrajectoryCoefficients& other) const {
    return n_ == other.n_ && nd_ == other.nd_ && nxi_ == other.nxi_;
  }
  bool operator==(const TrajectoryCoefficients&) const = default;

 private:
  std::size_t index(int robot, int axis, int j) const {
    return (static_cast<std::size_t>(robot) * nd_ + axis) * nxi_ + j;
  }

  int n_ = 0;
  int nd_ = 0;
  int nxi_ = 0;
  std::vector<double> data_;
};

/// Per-robot sampled series: series[i] is a (samples x n_d) matrix.
using RobotSeries = std::vector<Eigen::MatrixXd>;

/// Positions (0), velocities (1) or accelerations (2) on the basis grid.
RobotSeries evaluate(const TrajectoryCoefficients& coeffs, const BasisMatrices& basis,
                     int derivative);

/// Same as `evaluate` but on arbitrary normalized sample times.
RobotSeries evaluate_at(const TrajectoryCoefficients& coeffs, double duration,
                        const Eigen::VectorXd& tau, int derivative);

struct TimeScaling {
  double gamma = 1.0;
  double duration = 0.0;
  BasisMatrices basis;
};

/// Uniform time dilation so that speed <= v_max and acceleration <= a_max.
/// Peaks are measured on the 10x dense grid. Never shrinks the horizon.
TimeScaling time_scale_for_limits(const TrajectoryCoefficients& coeffs,
                                  const BasisMatrices& basis, double v_max, double a_max);

}  // namespace mrtraj
