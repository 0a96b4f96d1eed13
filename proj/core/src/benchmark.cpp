#include "mrtraj/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "mrtraj/error.hpp"

namespace mrtraj {

namespace {

nlohmann::json opt_json(const std::optional<int>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json num_json(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

BenchmarkRow run_instance(const BenchmarkConfig& cfg, int n, int instance) {
  BenchmarkRow row;
  row.n = n;
  row.instance = instance;
  row.seed = cfg.seed + static_cast<std::uint64_t>(instance);
  row.primal_at.assign(cfg.checkpoints.size(), std::numeric_limits<double>::quiet_NaN());
  row.iterations_to.assign(cfg.thresholds.size(), std::nullopt);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Scenario scn = generate(cfg.family, n, cfg.n_d, row.seed);
    const BasisMatrices basis = build_basis(scn.horizon);
    CandidateBatch batch;
    if (cfg.candidates.kind == CandidateSpec::Kind::kNaive) {
      batch = sample_naive_prior(scn, basis, cfg.candidates.count, row.seed, cfg.candidates.prior);
    } else {
      batch.candidates.push_back(straight_line(scn, basis.order()));
      batch.scores.resize(1);
    }
    PlanConfig plan_cfg = cfg.plan;
    plan_cfg.top_k = std::min<int>(plan_cfg.top_k, static_cast<int>(batch.size()));
    plan_cfg.solver.stop_on_primal = cfg.stop_at_primal_tol;
    const PlanResult result = plan(scn, std::move(batch), plan_cfg);
    const RefinedCandidate& sel = result.selected_refinement();

    row.status = to_string(result.status);
    row.success = result.status == PlanStatus::kFeasible;
    row.selected = result.selected;
    row.iterations = sel.result.state.iter;
    row.final_primal = sel.result.final_primal();
    for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
      row.iterations_to[t] = sel.result.iterations_to(cfg.thresholds[t]);
    }
    for (std::size_t c = 0; c < cfg.checkpoints.size(); ++c) {
      row.primal_at[c] = primal_at(sel.result, cfg.checkpoints[c]);
    }
    row.metrics = compute_metrics(result.best, basis, scn);
    attach_solver_outcome(row.metrics, sel.result, plan_cfg.solver.primal_tol, cfg.thresholds);
    row.metrics.success = row.success;
  } catch (const std::exception& e) {
    row.status = "error";
    row.error = e.what();
    row.success = false;
  }
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

}  // namespace

CandidateSpec CandidateSpec::parse(const std::string& text) {
  CandidateSpec spec;
  if (text == "line") {
    spec.kind = Kind::kStraightLine;
    spec.count = 1;
    return spec;
  }
  const std::string prefix = "naive:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string num = text.substr(prefix.size());
    std::size_t used = 0;
    int count = 0;
    try {
      count = std::stoi(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != num.size() || count < 1) {
      throw UsageError("candidate count in \"" + text + "\" must be a positive integer");
    }
    spec.kind = Kind::kNaive;
    spec.count = count;
    return spec;
  }
  throw UsageError("unknown candidate source \"" + text + "\" (expected naive:COUNT or line)");
}

std::string CandidateSpec::describe() const {
  return kind == Kind::kStraightLine ? "line" : "naive:" + std::to_string(count);
}

void BenchmarkConfig::validate() const {
  if (n_list.empty()) throw ConfigError("benchmark needs at least one robot count");
  for (int n : n_list) {
    if (n < 1) throw ConfigError("robot counts must be >= 1");
  }
  if (n_d != 2 && n_d != 3) throw ConfigError("n_d must be 2 or 3");
  if (instances < 1) throw ConfigError("instances must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  for (double t : thresholds) {
    if (!(t > 0.0)) throw ConfigError("thresholds must be > 0");
  }
  for (int c : checkpoints) {
    if (c < 0) throw ConfigError("checkpoints must be >= 0");
  }
  plan.validate();
}

double primal_at(const SolverResult& result, int checkpoint) {
  const auto& trace = result.state.trace;
  if (trace.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t idx = std::min<std::size_t>(checkpoint, trace.size() - 1);
  return trace[idx].primal;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  BenchmarkReport report;
  report.config = cfg;

  std::vector<std::pair<int, int>> tasks;
  for (int n : cfg.n_list) {
    for (int i = 0; i < cfg.instances; ++i) tasks.emplace_back(n, i);
  }
  report.rows.resize(tasks.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      report.rows[t] = run_instance(cfg, tasks[t].first, tasks[t].second);
    }
  };
  const int workers = std::min<int>(cfg.jobs, static_cast<int>(tasks.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  report.aggregates = aggregate_rows(cfg, report.rows);
  return report;
}

std::vector<BenchmarkAggregate> aggregate_rows(const BenchmarkConfig& cfg,
                                               const std::vector<BenchmarkRow>& rows) {
  std::vector<BenchmarkAggregate> out;
  for (int n : cfg.n_list) {
    BenchmarkAggregate agg;
    agg.n = n;
    double smooth = 0.0;
    double arc = 0.0;
    std::vector<std::vector<double>> at(cfg.checkpoints.size());
    std::vector<std::vector<int>> hits(cfg.thresholds.size());
    for (const auto& r : rows) {
      if (r.n != n) continue;
      ++agg.instances;
      agg.total_wall_seconds += r.wall_seconds;
      if (r.success) {
        ++agg.successes;
        smooth += r.metrics.smoothness;
        arc += r.metrics.arc_length;
      }
      for (std::size_t t = 0; t < hits.size(); ++t) {
        if (t < r.iterations_to.size() && r.iterations_to[t]) hits[t].push_back(*r.iterations_to[t]);
      }
      for (std::size_t c = 0; c < at.size(); ++c) {
        if (c < r.primal_at.size() && std::isfinite(r.primal_at[c])) at[c].push_back(r.primal_at[c]);
      }
    }
    if (agg.instances > 0) {
      agg.success_rate = static_cast<double>(agg.successes) / agg.instances;
      agg.mean_wall_seconds = agg.total_wall_seconds / agg.instances;
    }
    if (agg.successes > 0) {
      agg.mean_smoothness = smooth / agg.successes;
      agg.mean_arc_length = arc / agg.successes;
    }
    for (std::size_t t = 0; t < hits.size(); ++t) {
      ThresholdStats st;
      st.threshold = cfg.thresholds[t];
      st.reached = static_cast<int>(hits[t].size());
      if (!hits[t].empty()) {
        double sum = 0.0;
        for (int h : hits[t]) sum += h;
        st.mean = sum / static_cast<double>(hits[t].size());
        st.max = *std::max_element(hits[t].begin(), hits[t].end());
        st.min = *std::min_element(hits[t].begin(), hits[t].end());
      }
      agg.thresholds.push_back(st);
    }
    for (const auto& v : at) agg.median_primal_at.push_back(median(v));
    out.push_back(std::move(agg));
  }
  return out;
}

nlohmann::json fingerprint(const BenchmarkConfig& cfg) {
  const auto& f = cfg.family;
  const auto& s = cfg.plan.solver;
  nlohmann::json doc;
  doc["family"] = {{"kind", ScenarioFamily::kind_name(f.kind)},
                   {"box_half_extent", f.box_half_extent},
                   {"circle_radius", f.circle_radius},
                   {"workspace_margin", f.workspace_margin},
                   {"robot_radius", f.robot_radius},
                   {"robot_height_radius", f.robot_height_radius},
                   {"obstacle_count", f.obstacle_count},
                   {"clearance_factor", f.clearance_factor},
                   {"horizon",
                    {{"n_xi", f.horizon.order},
                     {"K", f.horizon.num_steps - 1},
                     {"T", f.horizon.duration}}}};
  doc["n_list"] = cfg.n_list;
  doc["n_d"] = cfg.n_d;
  doc["instances"] = cfg.instances;
  doc["seed"] = cfg.seed;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < cfg.instances; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
  doc["seed_set"] = seeds;
  doc["candidates"] = cfg.candidates.describe();
  doc["noise_fraction"] = cfg.candidates.prior.noise_fraction;
  doc["top_k"] = cfg.plan.top_k;
  doc["separation_margin"] = cfg.plan.separation_margin;
  doc["solver"] = {{"rho", s.rho},
                   {"max_iters", s.max_iters},
                   {"primal_tol", s.primal_tol},
                   {"fp_tol", s.fp_tol},
                   {"d_max", s.d_max},
                   {"stop_at_primal_tol", cfg.stop_at_primal_tol}};
  doc["thresholds"] = cfg.thresholds;
  doc["checkpoints"] = cfg.checkpoints;
#if defined(__VERSION__)
  doc["compiler"] = __VERSION__;
#endif
  return doc;
}

nlohmann::json report_to_json(const BenchmarkReport& report, bool include_timing) {
  const auto& cfg = report.config;
  nlohmann::json doc;
  doc["version"] = 1;
  doc["fingerprint"] = fingerprint(cfg);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json row;
    row["n"] = r.n;
    row["instance"] = r.instance;
    row["seed"] = r.seed;
    row["status"] = r.status;
    if (!r.error.empty()) row["error"] = r.error;
    row["success"] = r.success;
    row["selected"] = r.selected;
    row["iterations"] = r.iterations;
    row["final_primal"] = num_json(r.final_primal);
    nlohmann::json its = nlohmann::json::object();
    for (std::size_t t = 0; t < r.iterations_to.size(); ++t) {
      its[csv_number(cfg.thresholds[t])] = opt_json(r.iterations_to[t]);
    }
    row["iterations_to"] = its;
    nlohmann::json at = nlohmann::json::object();
    for (std::size_t c = 0; c < r.primal_at.size(); ++c) {
      at[std::to_string(cfg.checkpoints[c])] = num_json(r.primal_at[c]);
    }
    row["primal_at"] = at;
    row["metrics"] = metrics_to_json(r.metrics);
    if (include_timing) row["wall_seconds"] = r.wall_seconds;
    rows.push_back(std::move(row));
  }
  doc["rows"] = std::move(rows);

  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    nlohmann::json agg;
    agg["n"] = a.n;
    agg["instances"] = a.instances;
    agg["successes"] = a.successes;
    agg["success_rate"] = a.success_rate;
    nlohmann::json th = nlohmann::json::array();
    for (const auto& t : a.thresholds) {
      th.push_back({{"threshold", t.threshold},
                    {"reached", t.reached},
                    {"mean", opt_json(t.mean)},
                    {"max", opt_json(t.max)},
                    {"min", opt_json(t.min)}});
    }
    agg["iterations_to"] = th;
    nlohmann::json med = nlohmann::json::object();
    for (std::size_t c = 0; c < a.median_primal_at.size(); ++c) {
      med[std::to_string(cfg.checkpoints[c])] = num_json(a.median_primal_at[c]);
    }
    agg["median_primal_at"] = med;
    agg["mean_smoothness"] = opt_json(a.mean_smoothness);
    agg["mean_arc_length"] = opt_json(a.mean_arc_length);
    if (include_timing) {
      agg["mean_wall_seconds"] = a.mean_wall_seconds;
      agg["total_wall_seconds"] = a.total_wall_seconds;
    }
    aggs.push_back(std::move(agg));
  }
  doc["aggregates"] = std::move(aggs);
  return doc;
}

std::string report_to_csv(const BenchmarkReport& report, bool include_timing) {
  const auto& cfg = report.config;
  std::ostringstream os;
  os << "n,instance,seed,status,success,selected,iterations,final_primal";
  for (double t : cfg.thresholds) os << ",iters_to_" << csv_number(t);
  for (int c : cfg.checkpoints) os << ",primal_at_" << c;
  os << ",smoothness,arc_length,min_pairwise_clearance,avg_pairwise_distance";
  if (include_timing) os << ",wall_seconds";
  os << '\n';
  for (const auto& r : report.rows) {
    os << r.n << ',' << r.instance << ',' << r.seed << ',' << r.status << ','
       << (r.success ? 1 : 0) << ',' << r.selected << ',' << r.iterations << ','
       << csv_number(r.final_primal);
    for (const auto& it : r.iterations_to) os << ',' << (it ? std::to_string(*it) : "");
    for (double p : r.primal_at) os << ',' << csv_number(p);
    os << ',' << csv_number(r.metrics.smoothness) << ',' << csv_number(r.metrics.arc_length) << ','
       << csv_number(r.metrics.min_pairwise_clearance) << ','
       << csv_number(r.metrics.avg_pairwise_distance);
    if (include_timing) os << ',' << csv_number(r.wall_seconds);
    os << '\n';
  }
  return os.str();
}

}  // namespace mrtraj
