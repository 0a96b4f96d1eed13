#include "mrtraj/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mrtraj/error.hpp"

namespace mrtraj {

TrajectoryCoefficients::TrajectoryCoefficients(int num_robots, int dims, int order)
    : n_(num_robots), nd_(dims), nxi_(order),
      data_(static_cast<std::size_t>(num_robots) * dims * order, 0.0) {
  if (num_robots < 0 || dims < 0 || order < 0) {
    throw ShapeError("negative coefficient dimensions");
  }
}

TrajectoryCoefficients::TrajectoryCoefficients(int num_robots, int dims, int order,
                                               std::vector<double> flat)
    : n_(num_robots), nd_(dims), nxi_(order), data_(std::move(flat)) {
  const auto expected = static_cast<std::size_t>(num_robots) * dims * order;
  if (data_.size() != expected) {
    throw ShapeError("coefficient vector has length " + std::to_string(data_.size()) +
                     ", expected " + std::to_string(expected));
  }
}

Eigen::MatrixXd TrajectoryCoefficients::stacked() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n_) * nxi_, nd_);
  for (int ax = 0; ax < nd_; ++ax) {
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < nxi_; ++j) out(i * nxi_ + j, ax) = (*this)(i, ax, j);
    }
  }
  return out;
}

TrajectoryCoefficients TrajectoryCoefficients::from_stacked(const Eigen::MatrixXd& stacked,
                                                            int num_robots, int order) {
  if (stacked.rows() != static_cast<Eigen::Index>(num_robots) * order) {
    throw ShapeError("stacked coefficients have " + std::to_string(stacked.rows()) +
                     " rows, expected " + std::to_string(num_robots * order));
  }
  TrajectoryCoefficients out(num_robots, static_cast<int>(stacked.cols()), order);
  for (int ax = 0; ax < out.dims(); ++ax) {
    for (int i = 0; i < num_robots; ++i) {
      for (int j = 0; j < order; ++j) out(i, ax, j) = stacked(i * order + j, ax);
    }
  }
  return out;
}

bool TrajectoryCoefficients::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

RobotSeries apply(const TrajectoryCoefficients& coeffs, const Eigen::MatrixXd& rows) {
  if (rows.cols() != coeffs.order()) {
    throw ShapeError("basis has " + std::to_string(rows.cols()) +
                     " functions but coefficients have order " +
                     std::to_string(coeffs.order()));
  }
  RobotSeries series(coeffs.num_robots());
  for (int i = 0; i < coeffs.num_robots(); ++i) {
    Eigen::MatrixXd c(coeffs.order(), coeffs.dims());
    for (int ax = 0; ax < coeffs.dims(); ++ax) {
      for (int j = 0; j < coeffs.order(); ++j) c(j, ax) = coeffs(i, ax, j);
    }
    series[i] = rows * c;
  }
  return series;
}

double peak_norm(const RobotSeries& series) {
  double peak = 0.0;
  for (const auto& s : series) {
    if (s.rows() > 0) peak = std::max(peak, s.rowwise().norm().maxCoeff());
  }
  return peak;
}

}  // namespace

RobotSeries evaluate(const TrajectoryCoefficients& coeffs, const BasisMatrices& basis,
                     int derivative) {
  switch (derivative) {
    case 0:
      return apply(coeffs, basis.W);
    case 1:
      return apply(coeffs, basis.Wd);
    case 2:
      return apply(coeffs, basis.Wdd);
    default:
      throw ConfigError("derivative must be 0, 1 or 2");
  }
}

RobotSeries evaluate_at(const TrajectoryCoefficients& coeffs, double duration,
                        const Eigen::VectorXd& tau, int derivative) {
  return apply(coeffs, evaluate_basis_at(coeffs.order(), duration, tau, derivative));
}

TimeScaling time_scale_for_limits(const TrajectoryCoefficients& coeffs,
                                  const BasisMatrices& basis, double v_max, double a_max) {
  if (!(v_max > 0.0) || !(a_max > 0.0)) {
    throw ConfigError("v_max and a_max must be positive");
  }
  if (!(basis.duration() > 0.0)) {
    throw ConfigError("cannot time-scale a zero-duration trajectory");
  }
  const Eigen::VectorXd tau = dense_tau(basis.num_steps());
  const double speed = peak_norm(evaluate_at(coeffs, basis.duration(), tau, 1));
  const double accel = peak_norm(evaluate_at(coeffs, basis.duration(), tau, 2));

  TimeScaling out;
  out.gamma = std::max({1.0, speed / v_max, std::sqrt(accel / a_max)});
  out.duration = out.gamma * basis.duration();
  BasisConfig cfg = basis.config;
  cfg.duration = out.duration;
  out.basis = build_basis(cfg);
  return out;
}

}  // namespace mrtraj
