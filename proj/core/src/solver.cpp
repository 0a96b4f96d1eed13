#include "mrtraj/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mrtraj/error.hpp"
#include "mrtraj/scenario.hpp"

namespace mrtraj {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

// Separation penalty of one row as a function of beta (alpha, d fixed),
// dropping beta-independent terms. u is the planar delta projected on alpha.
double beta_objective(double beta, double u, double w, double ra, double rb, double d) {
  const double s = std::sin(beta);
  const double c = std::cos(beta);
  return d * d * (ra * ra * s * s + rb * rb * c * c) - 2.0 * d * (ra * u * s + rb * w * c);
}

// Maximizer of u sin(beta) + w cos(beta) over [0, pi].
double beta_sphere(double u, double w) {
  if (u == 0.0 && w == 0.0) return kHalfPi;
  const double phi = std::atan2(u, w);
  if (phi >= 0.0) return phi;
  return w >= 0.0 ? 0.0 : std::numbers::pi;
}

// Minimizer over [0, pi] for a true spheroid (ra != rb). The objective is the
// squared distance from (u, w) to an ellipse, so it can have two local minima:
// run a fixed, safeguarded Newton refinement from a few starts and keep the best.
double beta_spheroid(double u, double w, double ra, double rb, double d) {
  if (u == 0.0 && w == 0.0 && ra == rb) return kHalfPi;
  const std::array<double, 4> starts = {beta_sphere(u / ra, w / rb), 0.0, kHalfPi,
                                        std::numbers::pi};
  double best = kHalfPi;
  double best_val = std::numeric_limits<double>::infinity();
  const double k2 = d * d * (ra * ra - rb * rb);
  for (double beta : starts) {
    double val = beta_objective(beta, u, w, ra, rb, d);
    for (int it = 0; it < 12; ++it) {
      const double s = std::sin(beta);
      const double c = std::cos(beta);
      const double g = 2.0 * k2 * s * c - 2.0 * d * (ra * u * c - rb * w * s);
      const double h = 2.0 * k2 * (c * c - s * s) + 2.0 * d * (ra * u * s + rb * w * c);
      double step = h > 0.0 ? -g / h : (g > 0.0 ? -0.25 : 0.25);
      bool moved = false;
      for (int half = 0; half < 30; ++half) {
        const double cand = std::clamp(beta + step, 0.0, std::numbers::pi);
        const double cval = beta_objective(cand, u, w, ra, rb, d);
        if (cval < val) {
          beta = cand;
          val = cval;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    if (val < best_val) {
      best_val = val;
      best = beta;
    }
  }
  return best;
}

}  // namespace

// ---- configuration ----------------------------------------------------------

ObjectiveMode ObjectiveMode::projection(const TrajectoryCoefficients& target) {
  return projection(target.stacked());
}

ObjectiveMode ObjectiveMode::projection(Eigen::MatrixXd stacked_target) {
  ObjectiveMode mode;
  mode.kind = Kind::kProjection;
  mode.target = std::move(stacked_target);
  return mode;
}

ObjectiveMode ObjectiveMode::smoothness() {
  ObjectiveMode mode;
  mode.kind = Kind::kSmoothness;
  return mode;
}

void SolverConfig::validate() const {
  if (!(rho > 0.0)) throw ConfigError("rho must be > 0");
  if (max_iters < 0) throw ConfigError("max_iters must be >= 0");
  if (!(primal_tol > 0.0) || !(fp_tol > 0.0)) throw ConfigError("tolerances must be > 0");
  if (!(d_max >= 1.0)) throw ConfigError("d_max must be >= 1");
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConvergedPrimal:
      return "converged_primal";
    case SolveStatus::kConvergedFixedPoint:
      return "converged_fp";
    case SolveStatus::kMaxIters:
      return "max_iters";
  }
  return "unknown";
}

double SolverResult::final_primal() const {
  return state.trace.empty() ? std::numeric_limits<double>::quiet_NaN()
                             : state.trace.back().primal;
}

std::optional<int> SolverResult::iterations_to(double threshold) const {
  for (std::size_t l = 0; l < state.trace.size(); ++l) {
    if (state.trace[l].primal < threshold) return static_cast<int>(l);
  }
  return std::nullopt;
}

// ---- KKT ------------------------------------------------------------------------

KktCache::KktCache(const ConstraintSystem& sys, ObjectiveMode::Kind kind, double rho)
    : kind_(kind), rho_(rho), n_d_(sys.dims.n_d) {
  const auto& dims = sys.dims;
  const int vars = dims.vars_per_axis();
  const int order = dims.order;

  hessian_ = Eigen::MatrixXd::Zero(vars, vars);
  if (kind == ObjectiveMode::Kind::kProjection) {
    hessian_.diagonal().setOnes();
  } else {
    const Eigen::MatrixXd block = sys.basis.Wdd.transpose() * sys.basis.Wdd;
    for (int i = 0; i < dims.n; ++i) hessian_.block(i * order, i * order, order, order) = block;
  }
  const Eigen::MatrixXd FtF = Eigen::MatrixXd(sys.F_axis.transpose() * sys.F_axis);
  const Eigen::MatrixXd GtG = Eigen::MatrixXd(sys.G_axis.transpose() * sys.G_axis);
  hessian_ += rho * FtF + rho * GtG;
  hessian_ = 0.5 * (hessian_ + hessian_.transpose()).eval();

  // Null space of the boundary rows: xi = xp + Z y.
  const Eigen::MatrixXd At = sys.A_axis.transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(At);
  const int eq = static_cast<int>(sys.A_axis.rows());
  if (qr.rank() != eq) {
    throw SetupError("boundary equality rows are linearly dependent (rank " +
                     std::to_string(qr.rank()) + " < " + std::to_string(eq) + ")");
  }
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(vars, vars);
  const Eigen::MatrixXd Z = Q.rightCols(vars - eq);

  const Eigen::MatrixXd reduced = Z.transpose() * hessian_ * Z;
  Eigen::LLT<Eigen::MatrixXd> llt(reduced);
  if (llt.info() != Eigen::Success) {
    throw SetupError("reduced KKT Hessian is not positive definite");
  }
  X_ = Z * llt.solve(Z.transpose());
  X_ = 0.5 * (X_ + X_.transpose()).eval();

  // Minimum-norm particular solution of A xp = b, per axis.
  Eigen::LLT<Eigen::MatrixXd> aat(sys.A_axis * At);
  if (aat.info() != Eigen::Success) throw SetupError("A A^T is singular");
  const Eigen::MatrixXd xp = At * aat.solve(sys.b_eq);
  x0_ = xp - X_ * (hessian_ * xp);
}

Eigen::MatrixXd KktCache::solve(const Eigen::MatrixXd& eta) const {
  if (eta.rows() != X_.rows() || eta.cols() % n_d_ != 0) {
    throw ShapeError("KKT right-hand side has the wrong shape");
  }
  // Coefficient-based product: every output column depends only on its own
  // input column, independent of how many members are stacked.
  Eigen::MatrixXd out = X_.lazyProduct(eta);
  for (Eigen::Index c = 0; c < out.cols(); ++c) out.col(c) += x0_.col(c % n_d_);
  return out;
}

// ---- alternating-minimization sub-steps -----------------------------------------

RowVars to_rows(const SphericalVars& vars) {
  RowVars rows;
  rows.alpha.resize(vars.alpha.size() + vars.alpha_o.size());
  rows.beta.resize(rows.alpha.size());
  rows.d.resize(rows.alpha.size());
  rows.alpha << vars.alpha, vars.alpha_o;
  rows.beta << vars.beta, vars.beta_o;
  rows.d << vars.d, vars.d_o;
  return rows;
}

SphericalVars from_rows(const ConstraintSystem& sys, const RowVars& rows) {
  const int pr = sys.dims.pair_rows();
  const int orows = sys.dims.obstacle_rows();
  if (rows.alpha.size() != pr + orows) {
    throw ShapeError("row variables do not match the constraint system");
  }
  SphericalVars vars;
  vars.alpha = rows.alpha.head(pr);
  vars.beta = rows.beta.head(pr);
  vars.d = rows.d.head(pr);
  vars.alpha_o = rows.alpha.tail(orows);
  vars.beta_o = rows.beta.tail(orows);
  vars.d_o = rows.d.tail(orows);
  return vars;
}

Eigen::VectorXd am_alpha_step(const Eigen::MatrixXd& deltas) {
  Eigen::VectorXd alpha(deltas.rows());
  for (Eigen::Index r = 0; r < deltas.rows(); ++r) {
    const double dx = deltas(r, 0);
    const double dy = deltas(r, 1);
    alpha[r] = (dx == 0.0 && dy == 0.0) ? 0.0 : std::atan2(dy, dx);
  }
  return alpha;
}

Eigen::VectorXd am_beta_step(const ConstraintSystem& sys, const Eigen::MatrixXd& deltas,
                             const Eigen::VectorXd& alpha, const Eigen::VectorXd& d) {
  const Eigen::Index rows = deltas.rows();
  if (sys.dims.n_d == 2) return Eigen::VectorXd::Constant(rows, kHalfPi);
  const Eigen::MatrixXd& axes = row_axes(sys);
  Eigen::VectorXd beta(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double u = deltas(r, 0) * std::cos(alpha[r]) + deltas(r, 1) * std::sin(alpha[r]);
    const double w = deltas(r, 2);
    const double ra = axes(r, 0);
    const double rb = axes(r, 1);
    beta[r] = ra == rb ? beta_sphere(u, w) : beta_spheroid(u, w, ra, rb, d[r]);
  }
  return beta;
}

Eigen::VectorXd am_d_step(const ConstraintSystem& sys, const Eigen::MatrixXd& deltas,
                          const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                          double d_max) {
  const Eigen::Index rows = deltas.rows();
  const bool planar = sys.dims.n_d == 2;
  const Eigen::MatrixXd& axes = row_axes(sys);
  Eigen::VectorXd d(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double ra = axes(r, 0);
    const double rb = axes(r, 1);
    const double sb = planar ? 1.0 : std::sin(beta[r]);
    const double cb = planar ? 0.0 : std::cos(beta[r]);
    const double ex = ra * std::cos(alpha[r]) * sb;
    const double ey = ra * std::sin(alpha[r]) * sb;
    const double ez = rb * cb;
    double num = deltas(r, 0) * ex + deltas(r, 1) * ey;
    if (!planar) num += deltas(r, 2) * ez;
    const double den = ex * ex + ey * ey + ez * ez;
    d[r] = std::clamp(num / den, 1.0, d_max);
  }
  return d;
}

// ---- residuals ------------------------------------------------------------------

double augmented_lagrangian(const ConstraintSystem& sys, const ObjectiveMode& mode, double rho,
                            const Eigen::MatrixXd& xi, const SphericalVars& vars,
                            const Eigen::MatrixXd& slack, const Eigen::MatrixXd& lambda) {
  double objective = 0.0;
  if (mode.kind == ObjectiveMode::Kind::kProjection) {
    objective = 0.5 * (xi - mode.target).squaredNorm();
  } else {
    const auto& dims = sys.dims;
    for (int ax = 0; ax < dims.n_d; ++ax) {
      Eigen::Map<const Eigen::MatrixXd> c(xi.col(ax).data(), dims.order, dims.n);
      objective += 0.5 * (sys.basis.Wdd * c).squaredNorm();
    }
  }
  const Eigen::MatrixXd r1 = apply_F(sys, xi) - compute_e(sys, vars);
  const Eigen::MatrixXd r2 = workspace_gap(sys, xi) + slack;
  return objective + 0.5 * rho * r1.squaredNorm() + 0.5 * rho * r2.squaredNorm() -
         (lambda.array() * xi.array()).sum();
}

double primal_residual(const ConstraintSystem& sys, const Eigen::MatrixXd& xi, double d_max) {
  const Eigen::MatrixXd deltas = separation_deltas(sys, xi);
  const SphericalVars vars = extract_spherical(sys, deltas, d_max);
  const Eigen::MatrixXd r1 = apply_F(sys, xi) - compute_e(sys, vars);
  const Eigen::MatrixXd r2 = workspace_gap(sys, xi).cwiseMax(0.0);
  return r1.norm() + r2.norm();
}

double primal_residual(const SolverState& state, const ConstraintSystem& sys, double d_max) {
  return primal_residual(sys, state.xi, d_max);
}

double fixed_point_residual(const SolverState& prev, const SolverState& next) {
  return (next.xi - prev.xi).squaredNorm() + (next.lambda - prev.lambda).squaredNorm();
}

SolverState initial_state(const ConstraintSystem& sys, const TrajectoryCoefficients& init,
                          double d_max) {
  const auto& dims = sys.dims;
  if (init.num_robots() != dims.n || init.dims() != dims.n_d || init.order() != dims.order) {
    throw ShapeError("initial coefficients do not match the constraint system");
  }
  SolverState state;
  state.xi = init.stacked();
  state.lambda = Eigen::MatrixXd::Zero(state.xi.rows(), state.xi.cols());
  state.slack = (-workspace_gap(sys, state.xi)).cwiseMax(0.0);
  state.vars = extract_spherical(sys, separation_deltas(sys, state.xi), d_max);
  return state;
}

SolverState initial_state(const ConstraintSystem& sys, const TrajectoryCoefficients& init,
                          const TrajectoryCoefficients& lambda, double d_max) {
  SolverState state = initial_state(sys, init, d_max);
  if (!lambda.same_shape(init)) throw ShapeError("warm-start multiplier has the wrong shape");
  state.lambda = lambda.stacked();
  return state;
}

// ---- solver -----------------------------------------------------------------------

namespace {

// Everything the elementwise part of a step produces, before the xi-solve.
struct PendingStep {
  Eigen::MatrixXd lambda;
  Eigen::MatrixXd slack;
  SphericalVars vars;
  Eigen::MatrixXd eta;
  double primal = 0.0;
};

PendingStep prepare_step(const ConstraintSystem& sys, const SolverConfig& cfg,
                         const SolverState& state, const ObjectiveMode& mode) {
  const double rho = cfg.rho;
  const Eigen::MatrixXd offsets = separation_offsets(sys);
  const Eigen::MatrixXd Fxi = apply_F(sys, state.xi);
  const Eigen::MatrixXd deltas = Fxi - offsets;

  RowVars rows;
  rows.alpha = am_alpha_step(deltas);
  const Eigen::VectorXd d_prev = to_rows(state.vars).d;
  rows.beta = am_beta_step(sys, deltas, rows.alpha, d_prev);
  rows.d = am_d_step(sys, deltas, rows.alpha, rows.beta, cfg.d_max);

  PendingStep out;
  out.vars = from_rows(sys, rows);
  const Eigen::MatrixXd e = compute_e(sys, out.vars);
  const Eigen::MatrixXd r1 = Fxi - e;

  const Eigen::MatrixXd gap = workspace_gap(sys, state.xi);
  out.slack = (-gap).cwiseMax(0.0);
  const Eigen::MatrixXd r2 = gap + out.slack;

  out.primal = sys.isotropic() ? r1.norm() + r2.norm()
                               : primal_residual(sys, state.xi, cfg.d_max);

  out.lambda = state.lambda - rho * apply_Ft(sys, r1) - rho * apply_Gt(sys, r2);
  out.eta = rho * apply_Ft(sys, e) + rho * apply_Gt(sys, sys.h - out.slack) + out.lambda;
  if (mode.kind == ObjectiveMode::Kind::kProjection) out.eta += mode.target;
  return out;
}

}  // namespace

FixedPointSolver::FixedPointSolver(std::shared_ptr<const ConstraintSystem> sys,
                                   ObjectiveMode::Kind kind, SolverConfig cfg)
    : sys_(std::move(sys)), kind_(kind), cfg_(cfg) {
  if (!sys_) throw UsageError("solver needs a constraint system");
  cfg_.validate();
  kkt_ = std::make_shared<const KktCache>(*sys_, kind_, cfg_.rho);
}

void FixedPointSolver::check_member(const SolverState& state, const ObjectiveMode& mode) const {
  const auto& dims = sys_->dims;
  if (mode.kind != kind_) {
    throw UsageError("batch mixes objective kinds; one solver serves one kind");
  }
  if (state.xi.rows() != dims.vars_per_axis() || state.xi.cols() != dims.n_d ||
      state.lambda.rows() != state.xi.rows() || state.lambda.cols() != state.xi.cols()) {
    throw UsageError("batch member does not belong to this constraint system");
  }
  if (mode.kind == ObjectiveMode::Kind::kProjection &&
      (mode.target.rows() != state.xi.rows() || mode.target.cols() != state.xi.cols())) {
    throw ShapeError("projection target does not match the constraint system");
  }
}

void FixedPointSolver::step_batch(std::vector<SolverState>& states,
                                  const std::vector<const ObjectiveMode*>& modes) const {
  if (states.size() != modes.size()) throw UsageError("one objective per batch member");
  const int nd = sys_->dims.n_d;
  std::vector<PendingStep> pending;
  pending.reserve(states.size());
  Eigen::MatrixXd eta(sys_->dims.vars_per_axis(), nd * static_cast<Eigen::Index>(states.size()));
  for (std::size_t m = 0; m < states.size(); ++m) {
    check_member(states[m], *modes[m]);
    pending.push_back(prepare_step(*sys_, cfg_, states[m], *modes[m]));
    eta.middleCols(static_cast<Eigen::Index>(m) * nd, nd) = pending.back().eta;
  }
  const Eigen::MatrixXd xi = kkt_->solve(eta);
  for (std::size_t m = 0; m < states.size(); ++m) {
    SolverState& s = states[m];
    PendingStep& p = pending[m];
    const auto next_xi = xi.middleCols(static_cast<Eigen::Index>(m) * nd, nd);
    const double fp = (next_xi - s.xi).squaredNorm() + (p.lambda - s.lambda).squaredNorm();
    s.xi = next_xi;
    s.lambda = std::move(p.lambda);
    s.slack = std::move(p.slack);
    s.vars = std::move(p.vars);
    s.trace.push_back({p.primal, fp});
    ++s.iter;
  }
}

SolverState FixedPointSolver::step(const SolverState& state, const ObjectiveMode& mode) const {
  std::vector<SolverState> states{state};
  step_batch(states, {&mode});
  return std::move(states.front());
}

SolverResult FixedPointSolver::solve(SolverState init, const ObjectiveMode& mode) const {
  std::vector<SolverState> inits;
  inits.push_back(std::move(init));
  return std::move(solve_batch(std::move(inits), {mode}).front());
}

std::vector<SolverResult> FixedPointSolver::solve_batch(
    std::vector<SolverState> inits, const std::vector<ObjectiveMode>& modes) const {
  if (inits.size() != modes.size()) throw UsageError("one objective per batch member");
  if (inits.empty()) return {};
  for (std::size_t m = 0; m < inits.size(); ++m) check_member(inits[m], modes[m]);

  const int nd = sys_->dims.n_d;
  std::vector<SolverResult> results(inits.size());
  std::vector<std::size_t> active;
  for (std::size_t m = 0; m < inits.size(); ++m) {
    if (cfg_.max_iters == 0) {
      results[m] = {std::move(inits[m]), SolveStatus::kMaxIters};
    } else {
      active.push_back(m);
    }
  }

  std::vector<PendingStep> pending;
  while (!active.empty()) {
    pending.clear();
    Eigen::MatrixXd eta(sys_->dims.vars_per_axis(), nd * static_cast<Eigen::Index>(active.size()));
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t m = active[a];
      pending.push_back(prepare_step(*sys_, cfg_, inits[m], modes[m]));
      eta.middleCols(static_cast<Eigen::Index>(a) * nd, nd) = pending.back().eta;
    }
    const Eigen::MatrixXd xi = kkt_->solve(eta);

    std::vector<std::size_t> still;
    still.reserve(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t m = active[a];
      SolverState& s = inits[m];
      PendingStep& p = pending[a];
      const auto next_xi = xi.middleCols(static_cast<Eigen::Index>(a) * nd, nd);
      const double fp = (next_xi - s.xi).squaredNorm() + (p.lambda - s.lambda).squaredNorm();
      s.trace.push_back({p.primal, fp});

      // The primal residual describes the incoming iterate, so on success
      // that iterate is returned unchanged. At least one xi-step is required
      // so the boundary equalities hold.
      if (cfg_.stop_on_primal && p.primal < cfg_.primal_tol && s.iter >= 1) {
        results[m] = {std::move(s), SolveStatus::kConvergedPrimal};
        continue;
      }
      s.xi = next_xi;
      s.lambda = std::move(p.lambda);
      s.slack = std::move(p.slack);
      s.vars = std::move(p.vars);
      ++s.iter;
      if (fp < cfg_.fp_tol) {
        results[m] = {std::move(s), SolveStatus::kConvergedFixedPoint};
      } else if (s.iter >= cfg_.max_iters) {
        results[m] = {std::move(s), SolveStatus::kMaxIters};
      } else {
        still.push_back(m);
      }
    }
    active.swap(still);
  }
  return results;
}

SolverResult solve(const SolverState& init, const ConstraintSystem& sys,
                   const ObjectiveMode& mode, const SolverConfig& cfg) {
  FixedPointSolver solver(std::make_shared<const ConstraintSystem>(sys), mode.kind, cfg);
  return solver.solve(init, mode);
}

std::string trace_csv(const std::vector<TraceEntry>& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "iter,primal,fixed_point\n";
  for (std::size_t l = 0; l < trace.size(); ++l) {
    os << l << ',' << trace[l].primal << ',' << trace[l].fixed_point << '\n';
  }
  return os.str();
}

void write_trace_csv(const std::vector<TraceEntry>& trace, const std::filesystem::path& path) {
  write_text_file(path, trace_csv(trace));
}

}  // namespace mrtraj
