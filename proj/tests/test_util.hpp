#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "mrtraj/coefficients.hpp"
#include "mrtraj/constraints.hpp"
#include "mrtraj/pipeline.hpp"
#include "mrtraj/scenario.hpp"

namespace mrtraj::testing {

inline TrajectoryCoefficients random_coefficients(int n, int nd, int order, std::mt19937_64& rng,
                                                  double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  TrajectoryCoefficients c(n, nd, order);
  for (double& v : c.flat()) v = u(rng);
  return c;
}

/// Two robots swapping ends of a segment of length `length` centred at the
/// origin with heading `theta`. `offset` shifts each goal sideways by
/// opposite amounts, so the straight lines cross at the middle instead of
/// overlapping.
inline Scenario swap_scenario(double length, double theta, double offset, int n_d = 2) {
  Scenario scn;
  scn.n = 2;
  scn.n_d = n_d;
  scn.starts = Eigen::MatrixXd::Zero(2, n_d);
  scn.goals = Eigen::MatrixXd::Zero(2, n_d);
  const double hx = 0.5 * length * std::cos(theta);
  const double hy = 0.5 * length * std::sin(theta);
  const double px = -std::sin(theta) * offset;
  const double py = std::cos(theta) * offset;
  scn.starts.row(0).head(2) << -hx, -hy;
  scn.starts.row(1).head(2) << hx, hy;
  scn.goals.row(0).head(2) << hx + px, hy + py;
  scn.goals.row(1).head(2) << -hx - px, -hy - py;
  const double ext = 0.5 * length + std::abs(offset) + 1.0;
  scn.workspace.min = Eigen::VectorXd::Constant(n_d, -ext);
  scn.workspace.max = Eigen::VectorXd::Constant(n_d, ext);
  scn.validate();
  return scn;
}

/// Random two-robot swap: the first robot's start is the second's goal and
/// vice versa, up to a small lateral jitter.
inline Scenario random_swap(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> len(0.6, 1.8);
  std::uniform_real_distribution<double> ang(-3.14159, 3.14159);
  std::uniform_real_distribution<double> off(0.02, 0.08);
  std::bernoulli_distribution sign(0.5);
  const double o = off(rng) * (sign(rng) ? 1.0 : -1.0);
  return swap_scenario(len(rng), ang(rng), o);
}

}  // namespace mrtraj::testing
