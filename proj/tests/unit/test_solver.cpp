#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "mrtraj/error.hpp"
#include "mrtraj/metrics.hpp"
#include "mrtraj/pipeline.hpp"
#include "mrtraj/solver.hpp"
#include "test_util.hpp"

namespace mrtraj {
namespace {

using std::numbers::pi;

Scenario parked_pair(double gap, int n_d = 2) {
  Scenario scn;
  scn.n = 2;
  scn.n_d = n_d;
  scn.starts = Eigen::MatrixXd::Zero(2, n_d);
  scn.starts(1, 0) = gap;
  scn.goals = scn.starts;
  scn.workspace.min = Eigen::VectorXd::Constant(n_d, -2.0);
  scn.workspace.max = Eigen::VectorXd::Constant(n_d, 2.0);
  return scn;
}

Scenario far_lines() {
  Scenario scn = testing::swap_scenario(1.0, 0.0, 0.0);
  scn.goals = scn.starts;
  scn.goals(0, 1) = 1.0;
  scn.goals(1, 1) = 1.0;
  scn.validate();
  return scn;
}

double dense_clearance_ratio(const Scenario& scn, const TrajectoryCoefficients& c) {
  return compute_metrics(c, build_basis(scn.horizon), scn).min_normalized_separation;
}

TEST(SolverConfig, RejectsBadValues) {
  SolverConfig cfg;
  cfg.rho = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.max_iters = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.primal_tol = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_NO_THROW(SolverConfig{}.validate());
}

TEST(Solver, FeasibleStationaryInputIsAFixedPoint) {
  const Scenario scn = parked_pair(0.5);
  const ConstraintSystem sys = assemble(scn, build_basis(scn.horizon));
  const TrajectoryCoefficients init = straight_line(scn, 11);
  FixedPointSolver solver(std::make_shared<ConstraintSystem>(sys),
                          ObjectiveMode::Kind::kProjection, {});
  const SolverState s0 = initial_state(sys, init);
  const SolverState s1 = solver.step(s0, ObjectiveMode::projection(init));
  EXPECT_LT(fixed_point_residual(s0, s1), 1e-9);
  EXPECT_LT((s1.xi - s0.xi).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(s1.lambda.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(s1.iter, 1);
  ASSERT_EQ(s1.trace.size(), 1u);
  EXPECT_LT(s1.trace[0].primal, 1e-12);
}

TEST(Solver, MultiplierUnchangedWithZeroResiduals) {
  const Scenario scn = far_lines();
  const ConstraintSystem sys = assemble(scn, build_basis(scn.horizon));
  const TrajectoryCoefficients init = straight_line(scn, 11);
  std::mt19937_64 rng(3);
  TrajectoryCoefficients lam = testing::random_coefficients(2, 2, 11, rng);
  FixedPointSolver solver(std::make_shared<ConstraintSystem>(sys),
                          ObjectiveMode::Kind::kProjection, {});
  const SolverState s0 = initial_state(sys, init, lam);
  const SolverState s1 = solver.step(s0, ObjectiveMode::projection(init));
  EXPECT_LT((s1.lambda - s0.lambda).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Solver, ProjectionOfFeasibleTrajectoryIsIdentity) {
  const Scenario scn = far_lines();
  const ConstraintSystem sys = assemble(scn, build_basis(scn.horizon), 0.1);
  const TrajectoryCoefficients init = straight_line(scn, 11);
  const SolverResult r = solve(initial_state(sys, init), sys, ObjectiveMode::projection(init), {});
  EXPECT_NE(r.status, SolveStatus::kMaxIters);
  EXPECT_LT((r.state.xi - init.stacked()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Solver, HeadOnSwapSeparates) {
  const Scenario scn = testing::swap_scenario(1.0, 0.3, 0.02);
  const ConstraintSystem sys = assemble(scn, build_basis(scn.horizon), 0.1);
  const TrajectoryCoefficients init = straight_line(scn, 11);
  SolverConfig cfg;
  cfg.max_iters = 5000;
  const SolverResult r = solve(initial_state(sys, init), sys, ObjectiveMode::projection(init), cfg);
  ASSERT_EQ(r.status, SolveStatus::kConvergedPrimal);
  const auto& tr = r.state.trace;
  const std::size_t upto = std::min<std::size_t>(50, tr.size());
  for (std::size_t l = 1; l < upto; ++l) {
    EXPECT_LT(tr[l].primal, tr[l - 1].primal) << "iteration " << l;
  }
  const TrajectoryCoefficients out = r.state.coefficients(2, 11);
  EXPECT_GE(dense_clearance_ratio(scn, out), 1.0 - 1e-3);
}

TEST(Solver, BatchMatchesSequential) {
  const Scenario scn = generate(ScenarioFamily{}, 4, 2, 11);
  const BasisMatrices basis = build_basis(scn.horizon);
  const auto sys = std::make_shared<const ConstraintSystem>(assemble(scn, basis, 0.1));
  const CandidateBatch batch = sample_naive_prior(scn, basis, 8, 4);
  SolverConfig cfg;
  cfg.max_iters = 300;
  FixedPointSolver solver(sys, ObjectiveMode::Kind::kProjection, cfg);
  std::vector<SolverState> inits;
  std::vector<ObjectiveMode> modes;
  for (const auto& c : batch.candidates) {
    inits.push_back(initial_state(*sys, c));
    modes.push_back(ObjectiveMode::projection(c));
  }
  const std::vector<SolverResult> batched = solver.solve_batch(inits, modes);
  ASSERT_EQ(batched.size(), 8u);
  for (std::size_t m = 0; m < 8; ++m) {
    const SolverResult seq = solver.solve(inits[m], modes[m]);
    EXPECT_EQ(seq.status, batched[m].status);
    EXPECT_EQ(seq.state.iter, batched[m].state.iter);
    EXPECT_LT((seq.state.xi - batched[m].state.xi).cwiseAbs().maxCoeff(), 1e-10);
    const std::vector<SolverResult> single = solver.solve_batch({inits[m]}, {modes[m]});
    EXPECT_LT((single[0].state.xi - seq.state.xi).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Solver, MixedObjectiveKindsAreRejected) {
  const Scenario scn = far_lines();
  const auto sys = std::make_shared<const ConstraintSystem>(
      assemble(scn, build_basis(scn.horizon)));
  const TrajectoryCoefficients init = straight_line(scn, 11);
  FixedPointSolver solver(sys, ObjectiveMode::Kind::kProjection, {});
  const SolverState s = initial_state(*sys, init);
  EXPECT_THROW(solver.solve_batch({s, s}, {ObjectiveMode::projection(init),
                                           ObjectiveMode::smoothness()}),
               UsageError);
  const Scenario other = parked_pair(0.5);
  const ConstraintSystem sys3 = assemble(generate(ScenarioFamily{}, 3, 2, 1),
                                         build_basis(other.horizon));
  const SolverState foreign = initial_state(sys3, straight_line(generate(ScenarioFamily{}, 3, 2, 1), 11));
  EXPECT_THROW(solver.step(foreign, ObjectiveMode::projection(init)), UsageError);
  EXPECT_TRUE(solver.solve_batch({}, {}).empty());
}

TEST(PrimalResidual, OverlappingParkedPair) {
  const Scenario scn = parked_pair(0.18);
  const ConstraintSystem sys = assemble(scn, build_basis(scn.horizon));
  const Eigen::MatrixXd xi = straight_line(scn, 11).stacked();
  EXPECT_NEAR(primal_residual(sys, xi), 0.02 * std::sqrt(50.0), 1e-12);
}

TEST(PrimalResidual, WorkspaceTermIsExactlyZeroInside) {
  Scenario scn = parked_pair(0.5);
  scn.obstacles.clear();
  const ConstraintSystem sys = assemble(scn, build_basis(scn.horizon));
  const Eigen::MatrixXd xi = straight_line(scn, 11).stacked();
  EXPECT_EQ(workspace_gap(sys, xi).cwiseMax(0.0).squaredNorm(), 0.0);
  EXPECT_LT(primal_residual(sys, xi), 1e-12);

  Scenario solo = parked_pair(0.5);
  solo.n = 1;
  solo.starts = Eigen::RowVector2d(2.1, 0.0);
  solo.goals = solo.starts;
  const ConstraintSystem sys1 = assemble(solo, build_basis(solo.horizon));
  const Eigen::MatrixXd out = straight_line(solo, 11).stacked();
  EXPECT_NEAR(primal_residual(sys1, out), 0.1 * std::sqrt(50.0), 1e-12);
}

TEST(FixedPointResidual, IsSumOfSquaredChanges) {
  std::mt19937_64 rng(12);
  SolverState a, b;
  a.xi = Eigen::MatrixXd::Random(22, 2);
  b.xi = Eigen::MatrixXd::Random(22, 2);
  a.lambda = Eigen::MatrixXd::Random(22, 2);
  b.lambda = Eigen::MatrixXd::Random(22, 2);
  double naive = 0.0;
  for (int i = 0; i < 22; ++i) {
    for (int j = 0; j < 2; ++j) {
      naive += std::pow(b.xi(i, j) - a.xi(i, j), 2) + std::pow(b.lambda(i, j) - a.lambda(i, j), 2);
    }
  }
  EXPECT_NEAR(fixed_point_residual(a, b), naive, 1e-12);
}

TEST(Solver, BoundaryRowsHoldAtEveryIteration) {
  for (auto kind : {ObjectiveMode::Kind::kProjection, ObjectiveMode::Kind::kSmoothness}) {
    const Scenario scn = generate(ScenarioFamily{}, 5, 2, 21);
    const BasisMatrices basis = build_basis(scn.horizon);
    const auto sys = std::make_shared<const ConstraintSystem>(assemble(scn, basis, 0.1));
    const TrajectoryCoefficients init = sample_naive_prior(scn, basis, 1, 9).candidates[0];
    FixedPointSolver solver(sys, kind, {});
    const ObjectiveMode mode = kind == ObjectiveMode::Kind::kProjection
                                   ? ObjectiveMode::projection(init)
                                   : ObjectiveMode::smoothness();
    SolverState s = initial_state(*sys, init);
    double worst = 0.0;
    for (int l = 0; l < 200; ++l) {
      s = solver.step(s, mode);
      worst = std::max(worst, (sys->A_axis * s.xi - sys->b_eq).cwiseAbs().maxCoeff());
    }
    EXPECT_LT(worst, 1e-8);
  }
}

// Each sub-step must not be beaten by any point of a dense grid over its
// own variable, the others held at their values at that point of the step.
TEST(AlternatingSteps, GridOracle) {
  for (int nd : {2, 3}) {
    ScenarioFamily fam;
    fam.obstacle_count = 1;
    fam.robot_height_radius = 0.15;
    const Scenario scn = generate(fam, 3, nd, 30 + nd);
    const BasisMatrices basis = build_basis(scn.horizon);
    const ConstraintSystem sys = assemble(scn, basis, 0.1);
    std::mt19937_64 rng(40 + nd);
    const int fr = sys.dims.f_rows_per_axis();
    std::uniform_int_distribution<int> pick(0, fr - 1);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::MatrixXd xi = testing::random_coefficients(3, nd, 11, rng, 0.8).stacked();
      SolverState st = initial_state(sys, TrajectoryCoefficients::from_stacked(xi, 3, 11));
      RowVars prev = to_rows(st.vars);
      std::uniform_real_distribution<double> dist(1.0, 3.0);
      for (double& v : prev.d) v = dist(rng);
      const Eigen::MatrixXd deltas = separation_deltas(sys, xi);
      RowVars next;
      next.alpha = am_alpha_step(deltas);
      next.beta = am_beta_step(sys, deltas, next.alpha, prev.d);
      next.d = am_d_step(sys, deltas, next.alpha, next.beta, 1e6);
      const ObjectiveMode mode = ObjectiveMode::smoothness();
      const Eigen::MatrixXd slack = Eigen::MatrixXd::Zero(sys.h.rows(), nd);
      const Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(xi.rows(), nd);
      auto al = [&](const RowVars& rv) {
        return augmented_lagrangian(sys, mode, 1.0, xi, from_rows(sys, rv), slack, lam);
      };
      const int r = pick(rng);
      RowVars probe{next.alpha, prev.beta, prev.d};
      const double at_alpha = al(probe);
      for (int g = 0; g < 720; ++g) {
        probe.alpha[r] = -pi + 2 * pi * g / 720;
        EXPECT_GE(al(probe), at_alpha - 1e-12);
      }
      probe = {next.alpha, next.beta, prev.d};
      const double at_beta = al(probe);
      for (int g = 0; g <= 720; ++g) {
        probe.beta[r] = pi * g / 720;
        EXPECT_GE(al(probe), at_beta - 1e-12);
      }
      probe = next;
      const double at_d = al(probe);
      for (int g = 0; g < 720; ++g) {
        probe.d[r] = 1.0 + 10.0 * g / 719;
        EXPECT_GE(al(probe), at_d - 1e-12);
      }
    }
  }
}

TEST(Solver, TerminationStatusesAndTrace) {
  ScenarioFamily fam;
  fam.kind = FamilyKind::kCircleAntipodal;
  const Scenario scn = generate(fam, 6, 2, 3);
  const BasisMatrices basis = build_basis(scn.horizon);
  const ConstraintSystem sys = assemble(scn, basis, 0.1);
  const TrajectoryCoefficients init = straight_line(scn, 11);
  SolverConfig cfg;
  cfg.max_iters = 2;
  cfg.primal_tol = 1e-30;
  cfg.fp_tol = 1e-300;
  SolverResult r = solve(initial_state(sys, init), sys, ObjectiveMode::projection(init), cfg);
  EXPECT_EQ(r.status, SolveStatus::kMaxIters);
  EXPECT_EQ(r.state.iter, 2);
  EXPECT_EQ(r.state.trace.size(), 2u);

  cfg = {};
  r = solve(initial_state(sys, init), sys, ObjectiveMode::projection(init), cfg);
  ASSERT_EQ(r.status, SolveStatus::kConvergedPrimal);
  EXPECT_LT(r.state.trace.back().primal, cfg.primal_tol);
  EXPECT_LT(primal_residual(r.state, sys), cfg.primal_tol);
  EXPECT_EQ(r.final_primal(), r.state.trace.back().primal);
  const auto hit = r.iterations_to(cfg.primal_tol);
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(*hit, static_cast<int>(r.state.trace.size()) - 1);
  EXPECT_FALSE(r.iterations_to(0.0).has_value());

  cfg.stop_on_primal = false;
  r = solve(initial_state(sys, init), sys, ObjectiveMode::projection(init), cfg);
  EXPECT_EQ(r.status, SolveStatus::kConvergedFixedPoint);
  EXPECT_LT(r.state.trace.back().fixed_point, cfg.fp_tol);
  EXPECT_EQ(to_string(SolveStatus::kConvergedFixedPoint), "converged_fp");
}

TEST(Trace, CsvFormat) {
  const std::vector<TraceEntry> tr{{0.5, 0.25}, {1e-20, 0.1}};
  const std::string csv = trace_csv(tr);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iter,primal,fixed_point");
  std::getline(in, line);
  EXPECT_EQ(line, "0,0.5,0.25");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 2), "1,");
  EXPECT_DOUBLE_EQ(std::stod(line.substr(2, line.find(',', 2) - 2)), 1e-20);
  EXPECT_FALSE(std::getline(in, line));
}

TEST(Solver, SixteenRobotCircleColdStart) {
  ScenarioFamily fam;
  fam.kind = FamilyKind::kCircleAntipodal;
  const Scenario scn = generate(fam, 16, 2, 0);
  const ConstraintSystem sys = assemble(scn, build_basis(scn.horizon), 0.1);
  const TrajectoryCoefficients init = straight_line(scn, 11);
  SolverConfig cfg;
  cfg.primal_tol = 0.01;
  const SolverResult r = solve(initial_state(sys, init), sys, ObjectiveMode::projection(init), cfg);
  EXPECT_EQ(r.status, SolveStatus::kConvergedPrimal);
  ASSERT_TRUE(r.iterations_to(0.01).has_value());
  EXPECT_LE(*r.iterations_to(0.01), 15000);
}

TEST(Kkt, SingularEqualitiesRaiseSetupError) {
  const Scenario scn = far_lines();
  ConstraintSystem sys = assemble(scn, build_basis(scn.horizon));
  sys.A_axis.row(1) = sys.A_axis.row(0);
  EXPECT_THROW(KktCache(sys, ObjectiveMode::Kind::kProjection, 1.0), SetupError);
}

TEST(Kkt, SolveSatisfiesOptimality) {
  const Scenario scn = generate(ScenarioFamily{}, 3, 2, 2);
  const ConstraintSystem sys = assemble(scn, build_basis(scn.horizon));
  const KktCache kkt(sys, ObjectiveMode::Kind::kSmoothness, 1.0);
  const Eigen::MatrixXd eta = Eigen::MatrixXd::Random(33, 2);
  const Eigen::MatrixXd x = kkt.solve(eta);
  EXPECT_LT((sys.A_axis * x - sys.b_eq).cwiseAbs().maxCoeff(), 1e-10);
  // Stationarity: H x - eta lies in the row space of A.
  const Eigen::MatrixXd g = kkt.hessian() * x - eta;
  const Eigen::MatrixXd At = sys.A_axis.transpose();
  const Eigen::MatrixXd mult = At.colPivHouseholderQr().solve(g);
  EXPECT_LT((At * mult - g).cwiseAbs().maxCoeff(), 1e-8);
}

// ---- smoothness optimum against an independent penalty method -----------------

struct PenaltyProblem {
  const ConstraintSystem& sys;
  Eigen::MatrixXd Z;   // null-space basis of the full boundary matrix
  Eigen::VectorXd xp;  // particular solution
  Eigen::MatrixXd Q;   // smoothness Hessian on the full vector
  double mu = 1.0;

  Eigen::VectorXd full(const Eigen::VectorXd& z) const { return xp + Z * z; }

  // Residuals max(0, a_k - |p_0 - p_1|) on the grid and their Jacobian.
  void residuals(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) const {
    const int steps = sys.dims.steps;
    const int order = sys.dims.order;
    const int vars = sys.dims.vars_per_axis();
    const Eigen::MatrixXd F = Eigen::MatrixXd(sys.F_axis);
    r = Eigen::VectorXd::Zero(steps);
    J = Eigen::MatrixXd::Zero(steps, x.size());
    for (int k = 0; k < steps; ++k) {
      Eigen::Vector2d delta;
      for (int ax = 0; ax < 2; ++ax) delta[ax] = F.row(k).dot(x.segment(ax * vars, vars));
      const double dist = delta.norm();
      const double need = sys.separation_axes(k, 0);
      if (dist >= need) continue;
      r[k] = need - dist;
      for (int ax = 0; ax < 2; ++ax) {
        J.row(k).segment(ax * vars, vars) = -delta[ax] / dist * F.row(k);
      }
    }
    (void)order;
  }

  double cost(const Eigen::VectorXd& z) const {
    const Eigen::VectorXd x = full(z);
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    residuals(x, r, J);
    return 0.5 * x.dot(Q * x) + 0.5 * mu * r.squaredNorm();
  }

  Eigen::VectorXd minimize(Eigen::VectorXd z) const {
    double lm = 1e-3;
    for (int it = 0; it < 400; ++it) {
      const Eigen::VectorXd x = full(z);
      Eigen::VectorXd r;
      Eigen::MatrixXd J;
      residuals(x, r, J);
      const Eigen::MatrixXd Jz = J * Z;
      const Eigen::VectorXd grad = Z.transpose() * (Q * x) + mu * Jz.transpose() * r;
      const Eigen::MatrixXd H = Z.transpose() * Q * Z + mu * Jz.transpose() * Jz;
      const double c0 = cost(z);
      bool moved = false;
      for (int tries = 0; tries < 30; ++tries) {
        const Eigen::MatrixXd Hd =
            H + lm * Eigen::MatrixXd::Identity(H.rows(), H.cols()) * (1.0 + H.diagonal().maxCoeff());
        const Eigen::VectorXd step = Hd.ldlt().solve(-grad);
        if (cost(z + step) < c0) {
          z += step;
          lm = std::max(lm * 0.3, 1e-12);
          moved = true;
          break;
        }
        lm *= 10.0;
      }
      if (!moved || grad.norm() < 1e-12) break;
    }
    return z;
  }
};

TEST(Solver, SmoothnessMatchesPenaltyOracle) {
  const Scenario scn = testing::swap_scenario(1.2, 0.4, 0.05);
  const BasisMatrices basis = build_basis(scn.horizon);
  const ConstraintSystem sys = assemble(scn, basis);
  const TrajectoryCoefficients init = straight_line(scn, 11);
  SolverConfig cfg;
  cfg.primal_tol = 1e-6;
  cfg.max_iters = 15000;
  const SolverResult r = solve(initial_state(sys, init), sys, ObjectiveMode::smoothness(), cfg);
  ASSERT_NE(r.status, SolveStatus::kMaxIters);
  const TrajectoryCoefficients got = r.state.coefficients(2, 11);
  const double solver_cost = compute_metrics(got, basis, scn).smoothness_cost;

  // Independent construction: full vector in axis-major order.
  const Eigen::MatrixXd A = sys.full_A();
  const Eigen::VectorXd b = sys.full_b();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.transpose());
  const Eigen::MatrixXd Qfull =
      qr.householderQ() * Eigen::MatrixXd::Identity(A.cols(), A.cols());
  PenaltyProblem prob{sys};
  prob.Z = Qfull.rightCols(A.cols() - qr.rank());
  prob.xp = A.completeOrthogonalDecomposition().solve(b);
  const int vars = sys.dims.vars_per_axis();
  const Eigen::MatrixXd per_robot = basis.Wdd.transpose() * basis.Wdd;
  prob.Q = Eigen::MatrixXd::Zero(2 * vars, 2 * vars);
  for (int blk = 0; blk < 4; ++blk) prob.Q.block(blk * 11, blk * 11, 11, 11) = per_robot;

  const Eigen::VectorXd x_init =
      Eigen::Map<const Eigen::VectorXd>(init.stacked().data(), 2 * vars);
  Eigen::VectorXd z = prob.Z.transpose() * (x_init - prob.xp);
  for (double mu : {1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7}) {
    prob.mu = mu;
    z = prob.minimize(z);
  }
  const Eigen::VectorXd x = prob.full(z);
  const TrajectoryCoefficients oracle = TrajectoryCoefficients::from_stacked(
      Eigen::Map<const Eigen::MatrixXd>(x.data(), vars, 2), 2, 11);
  const double oracle_cost = compute_metrics(oracle, basis, scn).smoothness_cost;
  EXPECT_LT(primal_residual(sys, oracle.stacked()), 1e-2);
  EXPECT_LE(solver_cost, oracle_cost * 1.05);
}

}  // namespace
}  // namespace mrtraj
