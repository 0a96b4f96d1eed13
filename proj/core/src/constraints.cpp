#include "mrtraj/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mrtraj/error.hpp"

namespace mrtraj {

namespace {

using Triplet = Eigen::Triplet<double>;

// View of one stacked coefficient column as an (order x n) matrix.
Eigen::Map<const Eigen::MatrixXd> robot_blocks(const Eigen::MatrixXd& xi, int ax, int order,
                                               int n) {
  return {xi.col(ax).data(), order, n};
}

}  // namespace

Eigen::MatrixXd ConstraintSystem::pair_selection() const {
  Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(dims.pairs, dims.n);
  for (int p = 0; p < dims.pairs; ++p) {
    sel(p, pair_index[p].i) = 1.0;
    sel(p, pair_index[p].j) = -1.0;
  }
  return sel;
}

bool ConstraintSystem::isotropic() const {
  if (dims.n_d == 2) return true;
  if (a != b) return false;
  for (Eigen::Index m = 0; m < obstacle_axes.rows(); ++m) {
    if (obstacle_axes(m, 0) != obstacle_axes(m, 1)) return false;
  }
  return true;
}

Eigen::MatrixXd ConstraintSystem::full_A() const {
  const int rows = dims.eq_rows_per_axis();
  const int cols = dims.vars_per_axis();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows * dims.n_d, cols * dims.n_d);
  for (int ax = 0; ax < dims.n_d; ++ax) out.block(ax * rows, ax * cols, rows, cols) = A_axis;
  return out;
}

Eigen::VectorXd ConstraintSystem::full_b() const {
  return Eigen::Map<const Eigen::VectorXd>(b_eq.data(), b_eq.size());
}

Eigen::MatrixXd ConstraintSystem::full_F() const {
  const int rows = dims.f_rows_per_axis();
  const int cols = dims.vars_per_axis();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows * dims.n_d, cols * dims.n_d);
  const Eigen::MatrixXd block = F_axis;
  for (int ax = 0; ax < dims.n_d; ++ax) out.block(ax * rows, ax * cols, rows, cols) = block;
  return out;
}

Eigen::MatrixXd ConstraintSystem::full_G() const {
  const int rows = dims.g_rows_per_axis();
  const int cols = dims.vars_per_axis();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows * dims.n_d, cols * dims.n_d);
  const Eigen::MatrixXd block = G_axis;
  for (int ax = 0; ax < dims.n_d; ++ax) out.block(ax * rows, ax * cols, rows, cols) = block;
  return out;
}

Eigen::VectorXd ConstraintSystem::full_h() const {
  return Eigen::Map<const Eigen::VectorXd>(h.data(), h.size());
}

ConstraintSystem assemble(const Scenario& scn, const BasisMatrices& basis,
                          double separation_margin) {
  if (basis.order() != scn.horizon.order || basis.num_steps() != scn.horizon.num_steps) {
    throw ShapeError("basis (order " + std::to_string(basis.order()) + ", steps " +
                     std::to_string(basis.num_steps()) + ") does not match scenario horizon (" +
                     std::to_string(scn.horizon.order) + ", " +
                     std::to_string(scn.horizon.num_steps) + ")");
  }
  if (scn.rest_to_rest && basis.order() < 6) {
    throw ConfigError("rest-to-rest boundary conditions need basis order >= 6");
  }

  ConstraintSystem sys;
  SystemDims& dims = sys.dims;
  dims.n = scn.n;
  dims.n_d = scn.n_d;
  dims.order = basis.order();
  dims.steps = basis.num_steps();
  dims.n_obs = static_cast<int>(scn.obstacles.size());
  dims.pairs = scn.n * (scn.n - 1) / 2;
  dims.eq_rows_per_robot = scn.rest_to_rest ? 6 : 2;
  sys.basis = basis;
  if (!(separation_margin >= 0.0)) throw ConfigError("separation margin must be >= 0");
  sys.margin = separation_margin;
  sys.a = scn.contact_a();
  sys.b = scn.contact_b();

  const int n = dims.n;
  const int steps = dims.steps;
  const int order = dims.order;
  const int vars = dims.vars_per_axis();

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) sys.pair_index.push_back({i, j});
  }
  for (int i = 0; i < n; ++i) {
    for (int m = 0; m < dims.n_obs; ++m) sys.obstacle_index.push_back({i, m});
  }

  sys.obstacle_axes.resize(dims.n_obs, 2);
  sys.obstacle_positions.resize(static_cast<Eigen::Index>(dims.n_obs) * steps, dims.n_d);
  for (int m = 0; m < dims.n_obs; ++m) {
    const auto& ob = scn.obstacles[m];
    sys.obstacle_axes(m, 0) = ob.radii[0];
    sys.obstacle_axes(m, 1) = ob.radii[2];
    for (int k = 0; k < steps; ++k) {
      sys.obstacle_positions.row(m * steps + k) = ob.position_at(basis.grid[k]).transpose();
    }
  }

  const Eigen::VectorXd scale = margin_profile(basis, separation_margin);
  sys.separation_axes.resize(dims.f_rows_per_axis(), 2);
  for (int p = 0; p < dims.pairs; ++p) {
    auto block = sys.separation_axes.middleRows(static_cast<Eigen::Index>(p) * steps, steps);
    block.col(0) = sys.a * scale;
    block.col(1) = sys.b * scale;
  }
  for (std::size_t q = 0; q < sys.obstacle_index.size(); ++q) {
    const int m = sys.obstacle_index[q].obstacle;
    auto block = sys.separation_axes.middleRows(
        dims.pair_rows() + static_cast<Eigen::Index>(q) * steps, steps);
    block.col(0) = sys.obstacle_axes(m, 0) * scale;
    block.col(1) = sys.obstacle_axes(m, 1) * scale;
  }

  // Boundary equalities, robot-major: p(0), p(T) and optionally v, a at both ends.
  const int eq = dims.eq_rows_per_robot;
  sys.A_axis = Eigen::MatrixXd::Zero(dims.eq_rows_per_axis(), vars);
  sys.b_eq = Eigen::MatrixXd::Zero(dims.eq_rows_per_axis(), dims.n_d);
  for (int i = 0; i < n; ++i) {
    const int r0 = i * eq;
    const int c0 = i * order;
    sys.A_axis.block(r0 + 0, c0, 1, order) = basis.W.row(0);
    sys.A_axis.block(r0 + 1, c0, 1, order) = basis.W.row(steps - 1);
    sys.b_eq.row(r0 + 0) = scn.starts.row(i);
    sys.b_eq.row(r0 + 1) = scn.goals.row(i);
    if (scn.rest_to_rest) {
      sys.A_axis.block(r0 + 2, c0, 1, order) = basis.Wd.row(0);
      sys.A_axis.block(r0 + 3, c0, 1, order) = basis.Wd.row(steps - 1);
      sys.A_axis.block(r0 + 4, c0, 1, order) = basis.Wdd.row(0);
      sys.A_axis.block(r0 + 5, c0, 1, order) = basis.Wdd.row(steps - 1);
    }
  }

  // F_axis = [D (x) W ; I_n (x) (1_{n_obs} (x) W)].
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(dims.f_rows_per_axis()) * 2 * order);
  for (int p = 0; p < dims.pairs; ++p) {
    const auto [i, j] = sys.pair_index[p];
    for (int k = 0; k < steps; ++k) {
      const int row = p * steps + k;
      for (int c = 0; c < order; ++c) {
        trip.emplace_back(row, i * order + c, basis.W(k, c));
        trip.emplace_back(row, j * order + c, -basis.W(k, c));
      }
    }
  }
  for (std::size_t q = 0; q < sys.obstacle_index.size(); ++q) {
    const int i = sys.obstacle_index[q].robot;
    for (int k = 0; k < steps; ++k) {
      const int row = dims.pair_rows() + static_cast<int>(q) * steps + k;
      for (int c = 0; c < order; ++c) trip.emplace_back(row, i * order + c, basis.W(k, c));
    }
  }
  sys.F_axis.resize(dims.f_rows_per_axis(), vars);
  sys.F_axis.setFromTriplets(trip.begin(), trip.end());

  // G_axis = [I_n (x) W ; -I_n (x) W], h = [p_max ; -p_min].
  trip.clear();
  const int half = n * steps;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < steps; ++k) {
      for (int c = 0; c < order; ++c) {
        trip.emplace_back(i * steps + k, i * order + c, basis.W(k, c));
        trip.emplace_back(half + i * steps + k, i * order + c, -basis.W(k, c));
      }
    }
  }
  sys.G_axis.resize(dims.g_rows_per_axis(), vars);
  sys.G_axis.setFromTriplets(trip.begin(), trip.end());
  sys.h.resize(dims.g_rows_per_axis(), dims.n_d);
  for (int ax = 0; ax < dims.n_d; ++ax) {
    sys.h.col(ax).head(half).setConstant(scn.workspace.max[ax]);
    sys.h.col(ax).tail(half).setConstant(-scn.workspace.min[ax]);
  }
  return sys;
}

Eigen::MatrixXd separation_offsets(const ConstraintSystem& sys) {
  const auto& dims = sys.dims;
  Eigen::MatrixXd off = Eigen::MatrixXd::Zero(dims.f_rows_per_axis(), dims.n_d);
  for (std::size_t q = 0; q < sys.obstacle_index.size(); ++q) {
    const int m = sys.obstacle_index[q].obstacle;
    off.middleRows(dims.pair_rows() + static_cast<Eigen::Index>(q) * dims.steps, dims.steps) =
        sys.obstacle_positions.middleRows(static_cast<Eigen::Index>(m) * dims.steps, dims.steps);
  }
  return off;
}

Eigen::MatrixXd grid_positions(const ConstraintSystem& sys, const Eigen::MatrixXd& xi) {
  const auto& dims = sys.dims;
  if (xi.rows() != dims.vars_per_axis() || xi.cols() != dims.n_d) {
    throw ShapeError("stacked coefficients do not match the constraint system");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(dims.n) * dims.steps, dims.n_d);
  for (int ax = 0; ax < dims.n_d; ++ax) {
    Eigen::Map<Eigen::MatrixXd> pos(out.col(ax).data(), dims.steps, dims.n);
    pos.noalias() = sys.basis.W * robot_blocks(xi, ax, dims.order, dims.n);
  }
  return out;
}

Eigen::MatrixXd apply_F(const ConstraintSystem& sys, const Eigen::MatrixXd& xi) {
  const auto& dims = sys.dims;
  const Eigen::MatrixXd pos = grid_positions(sys, xi);
  const int steps = dims.steps;
  Eigen::MatrixXd out(dims.f_rows_per_axis(), dims.n_d);
  for (int ax = 0; ax < dims.n_d; ++ax) {
    for (int p = 0; p < dims.pairs; ++p) {
      const auto [i, j] = sys.pair_index[p];
      out.col(ax).segment(p * steps, steps) =
          pos.col(ax).segment(i * steps, steps) - pos.col(ax).segment(j * steps, steps);
    }
    for (std::size_t q = 0; q < sys.obstacle_index.size(); ++q) {
      const int i = sys.obstacle_index[q].robot;
      out.col(ax).segment(dims.pair_rows() + static_cast<Eigen::Index>(q) * steps, steps) =
          pos.col(ax).segment(i * steps, steps);
    }
  }
  return out;
}

Eigen::MatrixXd apply_Ft(const ConstraintSystem& sys, const Eigen::MatrixXd& r) {
  const auto& dims = sys.dims;
  if (r.rows() != dims.f_rows_per_axis() || r.cols() != dims.n_d) {
    throw ShapeError("separation residual does not match the constraint system");
  }
  const int steps = dims.steps;
  Eigen::MatrixXd out(dims.vars_per_axis(), dims.n_d);
  Eigen::MatrixXd agg(steps, dims.n);
  for (int ax = 0; ax < dims.n_d; ++ax) {
    agg.setZero();
    for (int p = 0; p < dims.pairs; ++p) {
      const auto [i, j] = sys.pair_index[p];
      const auto seg = r.col(ax).segment(p * steps, steps);
      agg.col(i) += seg;
      agg.col(j) -= seg;
    }
    for (std::size_t q = 0; q < sys.obstacle_index.size(); ++q) {
      agg.col(sys.obstacle_index[q].robot) +=
          r.col(ax).segment(dims.pair_rows() + static_cast<Eigen::Index>(q) * steps, steps);
    }
    Eigen::Map<Eigen::MatrixXd> dst(out.col(ax).data(), dims.order, dims.n);
    dst.noalias() = sys.basis.W.transpose() * agg;
  }
  return out;
}

Eigen::MatrixXd workspace_gap(const ConstraintSystem& sys, const Eigen::MatrixXd& xi) {
  const Eigen::MatrixXd pos = grid_positions(sys, xi);
  const Eigen::Index half = pos.rows();
  Eigen::MatrixXd out(2 * half, sys.dims.n_d);
  out.topRows(half) = pos;
  out.bottomRows(half) = -pos;
  return out - sys.h;
}

Eigen::MatrixXd apply_Gt(const ConstraintSystem& sys, const Eigen::MatrixXd& v) {
  const auto& dims = sys.dims;
  const Eigen::Index half = static_cast<Eigen::Index>(dims.n) * dims.steps;
  if (v.rows() != 2 * half || v.cols() != dims.n_d) {
    throw ShapeError("workspace vector does not match the constraint system");
  }
  Eigen::MatrixXd out(dims.vars_per_axis(), dims.n_d);
  for (int ax = 0; ax < dims.n_d; ++ax) {
    const Eigen::VectorXd diff = v.col(ax).head(half) - v.col(ax).tail(half);
    Eigen::Map<const Eigen::MatrixXd> agg(diff.data(), dims.steps, dims.n);
    Eigen::Map<Eigen::MatrixXd> dst(out.col(ax).data(), dims.order, dims.n);
    dst.noalias() = sys.basis.W.transpose() * agg;
  }
  return out;
}

Eigen::VectorXd margin_profile(const BasisMatrices& basis, double margin) {
  Eigen::VectorXd scale(basis.num_steps());
  for (int k = 0; k < basis.num_steps(); ++k) {
    const double s = std::sin(std::numbers::pi * basis.grid[k] / basis.duration());
    scale[k] = 1.0 + margin * s * s;
  }
  return scale;
}

const Eigen::MatrixXd& row_axes(const ConstraintSystem& sys) { return sys.separation_axes; }

Eigen::MatrixXd compute_e(const ConstraintSystem& sys, const SphericalVars& vars) {
  const auto& dims = sys.dims;
  const int pr = dims.pair_rows();
  const int orows = dims.obstacle_rows();
  if (vars.alpha.size() != pr || vars.d.size() != pr || vars.alpha_o.size() != orows ||
      vars.d_o.size() != orows) {
    throw ShapeError("spherical variables do not match the constraint system");
  }
  const bool planar = dims.n_d == 2;
  Eigen::MatrixXd e = separation_offsets(sys);
  auto fill = [&](Eigen::Index row, double ra, double rb, double alpha, double beta, double d) {
    const double sb = planar ? 1.0 : std::sin(beta);
    e(row, 0) += ra * d * std::cos(alpha) * sb;
    e(row, 1) += ra * d * std::sin(alpha) * sb;
    if (!planar) e(row, 2) += rb * d * std::cos(beta);
  };
  const Eigen::MatrixXd& axes = sys.separation_axes;
  for (int r = 0; r < pr; ++r) {
    fill(r, axes(r, 0), axes(r, 1), vars.alpha[r], planar ? 0.0 : vars.beta[r], vars.d[r]);
  }
  for (Eigen::Index r = 0; r < orows; ++r) {
    fill(pr + r, axes(pr + r, 0), axes(pr + r, 1), vars.alpha_o[r],
         planar ? 0.0 : vars.beta_o[r], vars.d_o[r]);
  }
  return e;
}

Eigen::MatrixXd separation_deltas(const ConstraintSystem& sys, const Eigen::MatrixXd& xi) {
  return apply_F(sys, xi) - separation_offsets(sys);
}

SphericalVars extract_spherical(const ConstraintSystem& sys, const Eigen::MatrixXd& deltas,
                                double d_max) {
  const auto& dims = sys.dims;
  if (deltas.rows() != dims.f_rows_per_axis() || deltas.cols() != dims.n_d) {
    throw ShapeError("separation deltas do not match the constraint system");
  }
  const bool planar = dims.n_d == 2;
  const Eigen::MatrixXd& axes = sys.separation_axes;
  const Eigen::Index rows = deltas.rows();
  Eigen::VectorXd alpha(rows), beta(rows), d(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double dx = deltas(r, 0);
    const double dy = deltas(r, 1);
    const double dz = planar ? 0.0 : deltas(r, 2);
    const double ra = axes(r, 0);
    const double rb = axes(r, 1);
    alpha[r] = (dx == 0.0 && dy == 0.0) ? 0.0 : std::atan2(dy, dx);
    const double nxy = std::hypot(dx / ra, dy / ra);
    const double nz = dz / rb;
    if (nxy == 0.0 && nz == 0.0) {
      beta[r] = std::numbers::pi / 2.0;
      d[r] = 1.0;
      continue;
    }
    beta[r] = planar ? std::numbers::pi / 2.0 : std::atan2(nxy, nz);
    d[r] = std::clamp(std::hypot(nxy, nz), 1.0, d_max);
  }
  SphericalVars vars;
  const int pr = dims.pair_rows();
  const int orows = dims.obstacle_rows();
  vars.alpha = alpha.head(pr);
  vars.beta = beta.head(pr);
  vars.d = d.head(pr);
  vars.alpha_o = alpha.tail(orows);
  vars.beta_o = beta.tail(orows);
  vars.d_o = d.tail(orows);
  return vars;
}

SphericalVars extract_spherical(const ConstraintSystem& sys, const RobotSeries& positions,
                                double d_max) {
  const auto& dims = sys.dims;
  if (static_cast<int>(positions.size()) != dims.n) {
    throw ShapeError("position series must cover every robot");
  }
  const int steps = dims.steps;
  Eigen::MatrixXd deltas(dims.f_rows_per_axis(), dims.n_d);
  for (const auto& s : positions) {
    if (s.rows() != steps || s.cols() != dims.n_d) {
      throw ShapeError("position series must be steps x n_d");
    }
  }
  for (int p = 0; p < dims.pairs; ++p) {
    const auto [i, j] = sys.pair_index[p];
    deltas.middleRows(p * steps, steps) = positions[i] - positions[j];
  }
  for (std::size_t q = 0; q < sys.obstacle_index.size(); ++q) {
    const auto [i, m] = sys.obstacle_index[q];
    deltas.middleRows(dims.pair_rows() + static_cast<Eigen::Index>(q) * steps, steps) =
        positions[i] - sys.obstacle_positions.middleRows(static_cast<Eigen::Index>(m) * steps,
                                                         steps);
  }
  return extract_spherical(sys, deltas, d_max);
}

}  // namespace mrtraj
