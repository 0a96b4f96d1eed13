#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrtraj/coefficients.hpp"
#include "mrtraj/scenario.hpp"
#include "mrtraj/solver.hpp"

namespace mrtraj {

enum class CandidateSource { kFlowFile, kNaivePrior };
std::string to_string(CandidateSource source);

/// Scores filled in as the planner stages run.
struct CandidateScore {
  double pre_residual = 0.0;
  std::optional<double> post_residual;
  std::optional<double> smoothness;
};

struct CandidateBatch {
  std::vector<TrajectoryCoefficients> candidates;
  CandidateSource source = CandidateSource::kNaivePrior;
  std::vector<CandidateScore> scores;

  std::size_t size() const { return candidates.size(); }
};

/// Straight start-to-goal coefficients. The first and last three
/// coefficients equal the endpoints, so every boundary row holds exactly.
TrajectoryCoefficients straight_line(const Scenario& scn, int order);

struct NaivePriorConfig {
  /// Noise standard deviation as a fraction of the largest workspace side.
  double noise_fraction = 0.05;
};

/// Straight lines plus Gaussian noise on the interior coefficients. Boundary
/// coefficients stay untouched. Deterministic per seed.
CandidateBatch sample_naive_prior(const Scenario& scn, const BasisMatrices& basis, int count,
                                  std::uint64_t seed, const NaivePriorConfig& cfg = {});

nlohmann::json candidates_to_json(const std::vector<TrajectoryCoefficients>& candidates);
void save_candidates(const std::vector<TrajectoryCoefficients>& candidates,
                     const std::filesystem::path& path);
/// Validates the dims against the scenario. Throws ValidationError naming
/// the expected and actual values.
CandidateBatch candidates_from_json(const nlohmann::json& doc, const Scenario& scn);
CandidateBatch load_candidates(const std::filesystem::path& path, const Scenario& scn);

enum class WarmStartProvenance { kFromCandidate, kFromInitNetFile };

struct WarmStart {
  TrajectoryCoefficients xi0;
  TrajectoryCoefficients lambda0;
  WarmStartProvenance provenance = WarmStartProvenance::kFromCandidate;
};

/// Warm starts aligned index-wise with a candidate file.
std::vector<WarmStart> warmstarts_from_json(const nlohmann::json& doc, const Scenario& scn);
std::vector<WarmStart> load_warmstarts(const std::filesystem::path& path, const Scenario& scn);
nlohmann::json warmstarts_to_json(const std::vector<WarmStart>& entries);
void save_warmstarts(const std::vector<WarmStart>& entries, const std::filesystem::path& path);

struct PlanConfig {
  int top_k = 10;
  SolverConfig solver;
  /// Peak relative inflation of contact distances used by the solver.
  double separation_margin = 0.1;

  void validate() const;
};

enum class PlanStatus { kFeasible, kInfeasibleBestEffort };
std::string to_string(PlanStatus status);

struct RefinedCandidate {
  int candidate = 0;  ///< index into the batch
  SolverResult result;
  TrajectoryCoefficients coefficients;
  double smoothness = 0.0;  ///< mean acceleration norm
};

struct PlanResult {
  PlanStatus status = PlanStatus::kInfeasibleBestEffort;
  int selected = -1;  ///< batch index of the returned candidate
  TrajectoryCoefficients best;
  std::vector<int> ranking;  ///< batch indices sorted by pre-refinement residual
  std::vector<RefinedCandidate> refined;  ///< in ranking order
  CandidateBatch batch;  ///< input batch with scores filled

  const RefinedCandidate& selected_refinement() const;
};

/// Sample -> rank -> refine -> select. `warm` (optional) replaces the
/// initial iterate of each candidate while the candidate itself remains the
/// projection target.
PlanResult plan(const Scenario& scn, CandidateBatch batch, const PlanConfig& cfg,
                const std::vector<WarmStart>* warm = nullptr);

}  // namespace mrtraj
