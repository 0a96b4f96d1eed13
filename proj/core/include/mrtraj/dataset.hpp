#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrtraj/coefficients.hpp"
#include "mrtraj/scenario.hpp"
#include "mrtraj/solver.hpp"

namespace mrtraj {

/// One line of a dataset file: a scenario and a converged smooth solution.
struct DatasetRecord {
  Scenario scenario;
  TrajectoryCoefficients coefficients;
  double primal_residual = 0.0;
  double separation_margin = 0.0;
};

struct DatasetConfig {
  SolverConfig solver;
  double separation_margin = 0.1;
  /// Extra attempts from perturbed straight lines when the first solve fails.
  int retries = 3;
  double retry_noise_fraction = 0.05;
};

struct DatasetSummary {
  int attempted = 0;
  int written = 0;
};

nlohmann::json record_to_json(const DatasetRecord& record);
DatasetRecord record_from_json(const nlohmann::json& doc);

/// Solves `count` generated instances in smoothness mode and writes every
/// converged one as a JSON line. Instance i uses seed + i.
DatasetSummary gen_dataset(const ScenarioFamily& family, int n, int n_d, int count,
                           std::uint64_t seed, const DatasetConfig& cfg,
                           const std::filesystem::path& out_path);

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path);

/// Primal residual of a stored record, recomputed from scratch.
double replay_residual(const DatasetRecord& record, double d_max = 1e6);

}  // namespace mrtraj
