#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrtraj/metrics.hpp"
#include "mrtraj/pipeline.hpp"
#include "mrtraj/scenario.hpp"

namespace mrtraj {

/// How the benchmark obtains candidates for each instance.
struct CandidateSpec {
  enum class Kind { kNaive, kStraightLine };
  Kind kind = Kind::kNaive;
  int count = 256;
  NaivePriorConfig prior;

  /// Parses "naive:COUNT" or "line".
  static CandidateSpec parse(const std::string& text);
  std::string describe() const;
};

struct BenchmarkConfig {
  ScenarioFamily family;
  std::vector<int> n_list{8};
  int n_d = 2;
  int instances = 20;
  std::uint64_t seed = 0;  ///< instance i uses seed + i
  CandidateSpec candidates;
  PlanConfig plan;
  std::vector<double> thresholds{0.01, 0.001};
  std::vector<int> checkpoints{50, 500};
  /// When false, refinements keep iterating past primal_tol until the
  /// fixed-point criterion so the residual decay is recorded in full.
  bool stop_at_primal_tol = false;
  int jobs = 1;

  void validate() const;
};

struct BenchmarkRow {
  int n = 0;
  int instance = 0;
  std::uint64_t seed = 0;
  std::string status;  ///< plan status, or "error"
  std::string error;
  bool success = false;
  int selected = -1;
  int iterations = 0;
  double final_primal = 0.0;
  std::vector<std::optional<int>> iterations_to;  ///< per threshold
  std::vector<double> primal_at;                  ///< per checkpoint
  TrajectoryMetrics metrics;
  double wall_seconds = 0.0;
};

struct ThresholdStats {
  double threshold = 0.0;
  int reached = 0;
  std::optional<double> mean;
  std::optional<int> max;
  std::optional<int> min;
};

struct BenchmarkAggregate {
  int n = 0;
  int instances = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::vector<ThresholdStats> thresholds;
  std::vector<double> median_primal_at;  ///< per checkpoint
  std::optional<double> mean_smoothness;  ///< over successful instances
  std::optional<double> mean_arc_length;
  double mean_wall_seconds = 0.0;
  double total_wall_seconds = 0.0;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::vector<BenchmarkRow> rows;
  std::vector<BenchmarkAggregate> aggregates;
};

/// Runs plan() on every generated instance. Failing instances are recorded
/// and never abort the sweep. Row order and content depend only on the
/// configuration, not on `jobs`.
BenchmarkReport run_benchmark(const BenchmarkConfig& cfg);

/// Recomputes the per-n aggregates from rows.
std::vector<BenchmarkAggregate> aggregate_rows(const BenchmarkConfig& cfg,
                                               const std::vector<BenchmarkRow>& rows);

/// Primal residual recorded at iteration `checkpoint`, or the last recorded
/// value when the solve stopped earlier.
double primal_at(const SolverResult& result, int checkpoint);

nlohmann::json fingerprint(const BenchmarkConfig& cfg);
nlohmann::json report_to_json(const BenchmarkReport& report, bool include_timing = true);
std::string report_to_csv(const BenchmarkReport& report, bool include_timing = true);

}  // namespace mrtraj
