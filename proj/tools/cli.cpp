#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "mrtraj/benchmark.hpp"
#include "mrtraj/dataset.hpp"
#include "mrtraj/error.hpp"
#include "mrtraj/metrics.hpp"
#include "mrtraj/pipeline.hpp"
#include "mrtraj/scenario.hpp"

namespace mrtraj::cli {

namespace fs = std::filesystem;

namespace {

struct SolverOptions {
  SolverConfig solver;
  double margin = PlanConfig{}.separation_margin;

  void add_to(CLI::App& app) {
    app.add_option("--rho", solver.rho, "Penalty parameter")->capture_default_str();
    app.add_option("--max-iters", solver.max_iters, "Iteration cap")->capture_default_str();
    app.add_option("--primal-tol", solver.primal_tol, "Feasibility threshold")
        ->capture_default_str();
    app.add_option("--fp-tol", solver.fp_tol, "Fixed-point threshold")->capture_default_str();
    app.add_option("--margin", margin, "Peak relative inflation of contact distances")
        ->capture_default_str();
  }
};

struct HorizonOptions {
  BasisConfig horizon;

  void add_to(CLI::App& app) {
    app.add_option("--n-xi", horizon.order, "Number of basis functions")->capture_default_str();
    app.add_option("--steps", horizon.num_steps, "Time samples K+1")->capture_default_str();
    app.add_option("--duration", horizon.duration, "Horizon T in seconds")->capture_default_str();
  }
};

struct FamilyOptions {
  std::string family = "random_box";
  int obstacles = 0;
  double radius = ScenarioFamily{}.robot_radius;

  void add_to(CLI::App& app) {
    app.add_option("--family", family, "random_box | circle_antipodal")->capture_default_str();
    app.add_option("--obstacles", obstacles, "Obstacle count")->capture_default_str();
    app.add_option("--radius", radius, "Robot radius")->capture_default_str();
  }

  ScenarioFamily build(const BasisConfig& horizon) const {
    ScenarioFamily f;
    f.kind = ScenarioFamily::parse_kind(family);
    f.obstacle_count = obstacles;
    f.robot_radius = radius;
    f.robot_height_radius = radius;
    f.horizon = horizon;
    return f;
  }
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    is >> v;
    if (!is || !is.eof()) throw UsageError(std::string("invalid ") + what + " \"" + item + "\"");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
  return out;
}

std::string trajectory_csv(const TrajectoryCoefficients& coeffs, const BasisMatrices& basis) {
  const Eigen::VectorXd tau = dense_tau(basis.num_steps(), kDenseRefine);
  const RobotSeries pos = evaluate_at(coeffs, basis.duration(), tau, 0);
  std::ostringstream os;
  os << std::setprecision(17);
  os << "k,robot,x,y";
  if (coeffs.dims() == 3) os << ",z";
  os << '\n';
  for (Eigen::Index k = 0; k < tau.size(); ++k) {
    for (int i = 0; i < coeffs.num_robots(); ++i) {
      os << k << ',' << i;
      for (int ax = 0; ax < coeffs.dims(); ++ax) os << ',' << pos[i](k, ax);
      os << '\n';
    }
  }
  return os.str();
}

CandidateBatch make_candidates(const std::string& source, const Scenario& scn,
                               const BasisMatrices& basis, std::uint64_t seed, double noise) {
  if (source == "line" || source.rfind("naive:", 0) == 0) {
    CandidateSpec spec = CandidateSpec::parse(source);
    if (spec.kind == CandidateSpec::Kind::kStraightLine) {
      CandidateBatch batch;
      batch.candidates.push_back(straight_line(scn, basis.order()));
      batch.scores.resize(1);
      return batch;
    }
    return sample_naive_prior(scn, basis, spec.count, seed, NaivePriorConfig{noise});
  }
  return load_candidates(source, scn);
}

int cmd_gen_scenario(const FamilyOptions& fam, const HorizonOptions& hz, int n, int nd,
                     std::uint64_t seed, const std::string& output, std::ostream& out) {
  const Scenario scn = generate(fam.build(hz.horizon), n, nd, seed);
  save_scenario(scn, output);
  out << output << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-robot trajectory planning with a fixed-point safety filter", "mrtraj"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mrtraj 0.1.0");

  // gen-scenario
  auto* gen = app.add_subcommand("gen-scenario", "Generate a scenario file");
  FamilyOptions gen_fam;
  HorizonOptions gen_hz;
  int gen_n = 0;
  int gen_nd = 2;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen_fam.add_to(*gen);
  gen_hz.add_to(*gen);
  gen->add_option("--n", gen_n, "Number of robots")->required();
  gen->add_option("--nd", gen_nd, "Workspace dimension (2 or 3)")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  gen->add_option("-o,--output", gen_out, "Output scenario path")->required();

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Plan one scenario");
  std::string solve_scn;
  std::string solve_cands = "naive:256";
  std::string solve_warm;
  std::string solve_dir = ".";
  int solve_topk = PlanConfig{}.top_k;
  std::uint64_t solve_seed = 0;
  double solve_noise = NaivePriorConfig{}.noise_fraction;
  bool solve_trace = false;
  SolverOptions solve_opts;
  solve_cmd->add_option("--scenario", solve_scn, "Scenario JSON")->required();
  solve_cmd->add_option("--candidates", solve_cands, "naive:COUNT | line | candidate file")
      ->capture_default_str();
  solve_cmd->add_option("--warmstart", solve_warm, "Warm-start JSON aligned with the candidates");
  auto* topk_opt = solve_cmd->add_option("--top-k", solve_topk, "Candidates refined")
                       ->capture_default_str();
  solve_cmd->add_option("--seed", solve_seed, "Seed for naive candidates")->capture_default_str();
  solve_cmd->add_option("--noise", solve_noise, "Naive noise as a fraction of the workspace")
      ->capture_default_str();
  solve_cmd->add_option("-o,--out-dir", solve_dir, "Output directory")->capture_default_str();
  solve_cmd->add_flag("--trace", solve_trace, "Also write the residual trace CSV");
  solve_opts.add_to(*solve_cmd);

  // batch-solve
  auto* batch_cmd = app.add_subcommand("batch-solve", "Refine every candidate in one batch");
  std::string batch_scn;
  std::string batch_cands;
  std::string batch_warm;
  std::string batch_dir = ".";
  std::uint64_t batch_seed = 0;
  double batch_noise = NaivePriorConfig{}.noise_fraction;
  bool batch_trace = false;
  SolverOptions batch_opts;
  batch_cmd->add_option("--scenario", batch_scn, "Scenario JSON")->required();
  batch_cmd->add_option("--candidates", batch_cands, "naive:COUNT | line | candidate file")
      ->required();
  batch_cmd->add_option("--warmstart", batch_warm, "Warm-start JSON aligned with the candidates");
  batch_cmd->add_option("--seed", batch_seed, "Seed for naive candidates")->capture_default_str();
  batch_cmd->add_option("--noise", batch_noise, "Naive noise as a fraction of the workspace")
      ->capture_default_str();
  batch_cmd->add_option("-o,--out-dir", batch_dir, "Output directory")->capture_default_str();
  batch_cmd->add_flag("--trace", batch_trace, "Also write one residual trace CSV per member");
  batch_opts.add_to(*batch_cmd);

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Run the benchmark sweep");
  FamilyOptions bench_fam;
  HorizonOptions bench_hz;
  std::string bench_n = "8";
  int bench_nd = 2;
  int bench_instances = 20;
  std::uint64_t bench_seed = 0;
  std::string bench_cands = "naive:256";
  double bench_noise = NaivePriorConfig{}.noise_fraction;
  int bench_topk = PlanConfig{}.top_k;
  std::string bench_thresholds = "0.01,0.001";
  std::string bench_checkpoints = "50,500";
  int bench_jobs = 1;
  bool bench_no_timing = false;
  bool bench_stop_early = false;
  std::string bench_json = "report.json";
  std::string bench_csv = "report.csv";
  SolverOptions bench_opts;
  bench_fam.add_to(*bench);
  bench_hz.add_to(*bench);
  bench->add_option("--n", bench_n, "Robot counts, comma separated")->capture_default_str();
  bench->add_option("--nd", bench_nd, "Workspace dimension")->capture_default_str();
  bench->add_option("--instances", bench_instances, "Instances per robot count")
      ->capture_default_str();
  bench->add_option("--seed", bench_seed, "Base seed")->capture_default_str();
  bench->add_option("--candidates", bench_cands, "naive:COUNT | line")->capture_default_str();
  bench->add_option("--noise", bench_noise, "Naive noise as a fraction of the workspace")
      ->capture_default_str();
  bench->add_option("--top-k", bench_topk, "Candidates refined")->capture_default_str();
  bench->add_option("--thresholds", bench_thresholds, "Residual thresholds")
      ->capture_default_str();
  bench->add_option("--checkpoints", bench_checkpoints, "Iterations at which to record residuals")
      ->capture_default_str();
  bench->add_option("--jobs", bench_jobs, "Worker threads")->capture_default_str();
  bench->add_flag("--no-timing", bench_no_timing, "Omit wall-clock fields from the reports");
  bench->add_flag("--stop-at-tol", bench_stop_early,
                  "Stop refinements at primal_tol instead of the fixed-point criterion");
  bench->add_option("--json", bench_json, "JSON report path")->capture_default_str();
  bench->add_option("--csv", bench_csv, "CSV report path")->capture_default_str();
  bench_opts.add_to(*bench);

  // gen-dataset
  auto* ds = app.add_subcommand("gen-dataset", "Write converged smooth solutions as JSON lines");
  FamilyOptions ds_fam;
  HorizonOptions ds_hz;
  int ds_n = 0;
  int ds_nd = 2;
  int ds_count = 0;
  std::uint64_t ds_seed = 0;
  std::string ds_out;
  SolverOptions ds_opts;
  ds_fam.add_to(*ds);
  ds_hz.add_to(*ds);
  ds->add_option("--n", ds_n, "Number of robots")->required();
  ds->add_option("--nd", ds_nd, "Workspace dimension")->capture_default_str();
  ds->add_option("--count", ds_count, "Instances to attempt")->required();
  ds->add_option("--seed", ds_seed, "Base seed")->capture_default_str();
  ds->add_option("-o,--output", ds_out, "Output JSON-lines path")->required();
  ds_opts.add_to(*ds);

  // metrics
  auto* met = app.add_subcommand("metrics", "Compute trajectory metrics");
  std::string met_scn;
  std::string met_coeffs;
  int met_index = 0;
  std::string met_out;
  met->add_option("--scenario", met_scn, "Scenario JSON")->required();
  met->add_option("--coefficients", met_coeffs, "Candidate-schema coefficient file")->required();
  met->add_option("--index", met_index, "Sample index in the file")->capture_default_str();
  met->add_option("-o,--output", met_out, "Metrics JSON path (stdout when omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      return cmd_gen_scenario(gen_fam, gen_hz, gen_n, gen_nd, gen_seed, gen_out, out);
    }

    if (*solve_cmd) {
      const Scenario scn = load_scenario(solve_scn);
      const BasisMatrices basis = build_basis(scn.horizon);
      CandidateBatch batch = make_candidates(solve_cands, scn, basis, solve_seed, solve_noise);
      PlanConfig cfg;
      cfg.solver = solve_opts.solver;
      cfg.separation_margin = solve_opts.margin;
      cfg.top_k = topk_opt->count() > 0
                      ? solve_topk
                      : std::min<int>(solve_topk, static_cast<int>(batch.size()));
      std::optional<std::vector<WarmStart>> warm;
      if (!solve_warm.empty()) warm = load_warmstarts(solve_warm, scn);
      const PlanResult result = plan(scn, std::move(batch), cfg, warm ? &*warm : nullptr);
      const RefinedCandidate& sel = result.selected_refinement();

      fs::create_directories(solve_dir);
      const fs::path dir(solve_dir);
      save_candidates({result.best}, dir / "coefficients.json");
      write_text_file(dir / "trajectory.csv", trajectory_csv(result.best, basis));
      TrajectoryMetrics m = compute_metrics(result.best, basis, scn);
      attach_solver_outcome(m, sel.result, cfg.solver.primal_tol, {0.01, 0.001});
      m.success = result.status == PlanStatus::kFeasible;
      nlohmann::json doc = metrics_to_json(m);
      doc["status"] = to_string(result.status);
      doc["solver_status"] = to_string(sel.result.status);
      doc["selected"] = result.selected;
      doc["iterations"] = sel.result.state.iter;
      doc["final_primal"] = sel.result.final_primal();
      write_text_file(dir / "metrics.json", dump_json(doc));
      if (solve_trace) write_trace_csv(sel.result.state.trace, dir / "trace.csv");
      out << to_string(result.status) << " candidate=" << result.selected
          << " primal=" << sel.result.final_primal() << " iterations=" << sel.result.state.iter
          << '\n';
      return result.status == PlanStatus::kFeasible ? kExitOk : kExitInfeasible;
    }

    if (*batch_cmd) {
      const Scenario scn = load_scenario(batch_scn);
      const BasisMatrices basis = build_basis(scn.horizon);
      const CandidateBatch batch =
          make_candidates(batch_cands, scn, basis, batch_seed, batch_noise);
      std::optional<std::vector<WarmStart>> warm;
      if (!batch_warm.empty()) {
        warm = load_warmstarts(batch_warm, scn);
        if (warm->size() != batch.size()) {
          throw ValidationError("warm-start file has " + std::to_string(warm->size()) +
                                " entries for " + std::to_string(batch.size()) + " candidates");
        }
      }
      auto sys = std::make_shared<const ConstraintSystem>(assemble(scn, basis, batch_opts.margin));
      FixedPointSolver solver(sys, ObjectiveMode::Kind::kProjection, batch_opts.solver);
      std::vector<SolverState> inits;
      std::vector<ObjectiveMode> modes;
      for (std::size_t c = 0; c < batch.size(); ++c) {
        inits.push_back(warm ? initial_state(*sys, (*warm)[c].xi0, (*warm)[c].lambda0,
                                             batch_opts.solver.d_max)
                             : initial_state(*sys, batch.candidates[c], batch_opts.solver.d_max));
        modes.push_back(ObjectiveMode::projection(batch.candidates[c]));
      }
      const auto results = solver.solve_batch(std::move(inits), modes);

      fs::create_directories(batch_dir);
      const fs::path dir(batch_dir);
      std::vector<TrajectoryCoefficients> refined;
      nlohmann::json summary = nlohmann::json::array();
      int feasible = 0;
      for (std::size_t c = 0; c < results.size(); ++c) {
        refined.push_back(results[c].state.coefficients(scn.n, basis.order()));
        const bool ok = results[c].final_primal() < batch_opts.solver.primal_tol;
        feasible += ok ? 1 : 0;
        summary.push_back({{"index", c},
                           {"status", to_string(results[c].status)},
                           {"feasible", ok},
                           {"iterations", results[c].state.iter},
                           {"final_primal", results[c].final_primal()}});
        if (batch_trace) {
          write_trace_csv(results[c].state.trace, dir / ("trace_" + std::to_string(c) + ".csv"));
        }
      }
      save_candidates(refined, dir / "refined.json");
      write_text_file(dir / "summary.json", dump_json(summary));
      out << feasible << '/' << results.size() << " members feasible\n";
      return feasible > 0 ? kExitOk : kExitInfeasible;
    }

    if (*bench) {
      BenchmarkConfig cfg;
      cfg.family = bench_fam.build(bench_hz.horizon);
      cfg.n_list = parse_list<int>(bench_n, "robot count");
      cfg.n_d = bench_nd;
      cfg.instances = bench_instances;
      cfg.seed = bench_seed;
      cfg.candidates = CandidateSpec::parse(bench_cands);
      cfg.candidates.prior.noise_fraction = bench_noise;
      cfg.plan.top_k = bench_topk;
      cfg.plan.solver = bench_opts.solver;
      cfg.plan.separation_margin = bench_opts.margin;
      cfg.thresholds = parse_list<double>(bench_thresholds, "threshold");
      cfg.checkpoints = parse_list<int>(bench_checkpoints, "checkpoint");
      cfg.jobs = bench_jobs;
      cfg.stop_at_primal_tol = bench_stop_early;
      const BenchmarkReport report = run_benchmark(cfg);
      write_text_file(bench_json, dump_json(report_to_json(report, !bench_no_timing)));
      write_text_file(bench_csv, report_to_csv(report, !bench_no_timing));
      for (const auto& a : report.aggregates) {
        out << "n=" << a.n << " success_rate=" << a.success_rate << " (" << a.successes << '/'
            << a.instances << ")\n";
      }
      return kExitOk;
    }

    if (*ds) {
      DatasetConfig cfg;
      cfg.solver = ds_opts.solver;
      cfg.separation_margin = ds_opts.margin;
      const DatasetSummary s =
          gen_dataset(ds_fam.build(ds_hz.horizon), ds_n, ds_nd, ds_count, ds_seed, cfg, ds_out);
      out << s.written << '/' << s.attempted << " records written to " << ds_out << '\n';
      return kExitOk;
    }

    if (*met) {
      const Scenario scn = load_scenario(met_scn);
      const BasisMatrices basis = build_basis(scn.horizon);
      const CandidateBatch batch = load_candidates(met_coeffs, scn);
      if (met_index < 0 || static_cast<std::size_t>(met_index) >= batch.size()) {
        throw UsageError("--index " + std::to_string(met_index) + " out of range (file has " +
                         std::to_string(batch.size()) + " samples)");
      }
      const auto& coeffs = batch.candidates[met_index];
      TrajectoryMetrics m = compute_metrics(coeffs, basis, scn);
      const ConstraintSystem sys = assemble(scn, basis);
      const double primal = primal_residual(sys, coeffs.stacked());
      m.success = primal < SolverConfig{}.primal_tol;
      nlohmann::json doc = metrics_to_json(m);
      doc["primal_residual"] = primal;
      if (met_out.empty()) {
        out << dump_json(doc);
      } else {
        write_text_file(met_out, dump_json(doc));
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mrtraj::cli
