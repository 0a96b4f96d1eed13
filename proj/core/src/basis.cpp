#include "mrtraj/basis.hpp"

#include <string>
#include <vector>

#include "mrtraj/error.hpp"

namespace mrtraj {

namespace {

// Bernstein polynomials of every degree 0..degree at tau, built with the
// stable triangular recurrence. table[m][j] = B_{j,m}(tau).
std::vector<std::vector<double>> bernstein_table(int degree, double tau) {
  std::vector<std::vector<double>> table(degree + 1);
  table[0] = {1.0};
  const double u = 1.0 - tau;
  for (int m = 1; m <= degree; ++m) {
    auto& row = table[m];
    const auto& prev = table[m - 1];
    row.assign(m + 1, 0.0);
    for (int j = 0; j <= m; ++j) {
      double v = 0.0;
      if (j < m) v += u * prev[j];
      if (j > 0) v += tau * prev[j - 1];
      row[j] = v;
    }
  }
  return table;
}

double at(const std::vector<double>& row, int j) {
  return (j < 0 || j >= static_cast<int>(row.size())) ? 0.0 : row[j];
}

}  // namespace

void BasisConfig::validate() const {
  if (order < 4) {
    throw ConfigError("basis order must be >= 4, got " + std::to_string(order));
  }
  if (num_steps < order) {
    throw ConfigError("num_steps (K+1) must be >= order, got " + std::to_string(num_steps) +
                      " < " + std::to_string(order));
  }
  if (!(duration > 0.0)) {
    throw ConfigError("duration must be > 0, got " + std::to_string(duration));
  }
}

Eigen::MatrixXd evaluate_basis_at(int order, double duration, const Eigen::VectorXd& tau,
                                  int derivative) {
  if (derivative < 0 || derivative > 2) {
    throw ConfigError("derivative must be 0, 1 or 2");
  }
  const int degree = order - 1;
  Eigen::MatrixXd out(tau.size(), order);
  for (Eigen::Index k = 0; k < tau.size(); ++k) {
    const auto table = bernstein_table(degree, tau[k]);
    for (int j = 0; j < order; ++j) {
      double v = 0.0;
      if (derivative == 0) {
        v = table[degree][j];
      } else if (derivative == 1) {
        if (degree >= 1) {
          const auto& r = table[degree - 1];
          v = degree * (at(r, j - 1) - at(r, j)) / duration;
        }
      } else {
        if (degree >= 2) {
          const auto& r = table[degree - 2];
          v = degree * (degree - 1) * (at(r, j - 2) - 2.0 * at(r, j - 1) + at(r, j)) /
              (duration * duration);
        }
      }
      out(k, j) = v;
    }
  }
  return out;
}

BasisMatrices build_basis(const BasisConfig& cfg) {
  cfg.validate();
  const int steps = cfg.num_steps;
  Eigen::VectorXd tau(steps);
  for (int k = 0; k < steps; ++k) {
    tau[k] = steps == 1 ? 0.0 : static_cast<double>(k) / (steps - 1);
  }
  // Pin the end sample exactly so endpoint interpolation is bit-exact.
  tau[steps - 1] = 1.0;

  BasisMatrices basis;
  basis.config = cfg;
  basis.W = evaluate_basis_at(cfg.order, cfg.duration, tau, 0);
  basis.Wd = evaluate_basis_at(cfg.order, cfg.duration, tau, 1);
  basis.Wdd = evaluate_basis_at(cfg.order, cfg.duration, tau, 2);
  basis.grid = tau * cfg.duration;
  return basis;
}

Eigen::VectorXd dense_tau(int num_steps, int refine) {
  const int intervals = (num_steps - 1) * refine;
  Eigen::VectorXd tau(intervals + 1);
  for (int k = 0; k <= intervals; ++k) tau[k] = static_cast<double>(k) / intervals;
  tau[intervals] = 1.0;
  return tau;
}

}  // namespace mrtraj
