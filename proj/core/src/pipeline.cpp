#include "mrtraj/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "mrtraj/error.hpp"
#include "mrtraj/metrics.hpp"

namespace mrtraj {

namespace {

constexpr int kCandidateVersion = 1;
constexpr int kWarmStartVersion = 1;

// Number of coefficients fixed by the boundary rows at each end.
constexpr int kPinned = 3;

void check_dims(const char* what, const nlohmann::json& doc, const Scenario& scn,
                bool dims_required) {
  if (!doc.is_object()) throw ParseError(std::string(what) + ": top level must be an object");
  const auto version = doc.find("version");
  if (version == doc.end() || !version->is_number_integer()) {
    throw ParseError(std::string(what) + ": missing required field \"version\"");
  }
  if (version->get<int>() != 1) {
    throw ParseError(std::string(what) + ": unsupported version " + version->dump());
  }
  const std::pair<const char*, int> expected[] = {
      {"n", scn.n}, {"n_d", scn.n_d}, {"n_xi", scn.horizon.order}};
  for (const auto& [key, value] : expected) {
    const auto it = doc.find(key);
    if (it == doc.end()) {
      if (!dims_required) continue;
      throw ParseError(std::string(what) + ": missing required field \"" + key + "\"");
    }
    if (!it->is_number_integer()) {
      throw ParseError(std::string(what) + ": field \"" + key + "\" must be an integer");
    }
    if (it->get<int>() != value) {
      throw ValidationError(std::string(what) + ": " + key + " mismatch (expected " +
                            std::to_string(value) + ", got " + it->dump() + ")");
    }
  }
}

TrajectoryCoefficients parse_flat(const char* what, const nlohmann::json& arr,
                                  const Scenario& scn) {
  if (!arr.is_array()) throw ParseError(std::string(what) + ": coefficient list must be an array");
  const std::size_t expected =
      static_cast<std::size_t>(scn.n) * scn.n_d * static_cast<std::size_t>(scn.horizon.order);
  if (arr.size() != expected) {
    throw ValidationError(std::string(what) + ": coefficient count mismatch (expected " +
                          std::to_string(expected) + ", got " + std::to_string(arr.size()) + ")");
  }
  std::vector<double> flat;
  flat.reserve(expected);
  for (const auto& v : arr) {
    if (!v.is_number()) throw ParseError(std::string(what) + ": coefficients must be numbers");
    flat.push_back(v.get<double>());
  }
  TrajectoryCoefficients c(scn.n, scn.n_d, scn.horizon.order, std::move(flat));
  if (!c.all_finite()) throw ValidationError(std::string(what) + ": non-finite coefficient");
  return c;
}

nlohmann::json flat_json(const TrajectoryCoefficients& c) {
  const auto flat = c.flat();
  return nlohmann::json(std::vector<double>(flat.begin(), flat.end()));
}

}  // namespace

std::string to_string(CandidateSource source) {
  return source == CandidateSource::kFlowFile ? "flow_file" : "naive_prior";
}

std::string to_string(PlanStatus status) {
  return status == PlanStatus::kFeasible ? "feasible" : "infeasible_best_effort";
}

TrajectoryCoefficients straight_line(const Scenario& scn, int order) {
  if (order < 2 * kPinned) throw ConfigError("straight line needs basis order >= 6");
  TrajectoryCoefficients c(scn.n, scn.n_d, order);
  const double span = order - 1 - 2 * (kPinned - 1);
  for (int i = 0; i < scn.n; ++i) {
    for (int ax = 0; ax < scn.n_d; ++ax) {
      for (int j = 0; j < order; ++j) {
        const double phi = std::clamp((j - (kPinned - 1)) / span, 0.0, 1.0);
        c(i, ax, j) = (1.0 - phi) * scn.starts(i, ax) + phi * scn.goals(i, ax);
      }
    }
  }
  return c;
}

CandidateBatch sample_naive_prior(const Scenario& scn, const BasisMatrices& basis, int count,
                                  std::uint64_t seed, const NaivePriorConfig& cfg) {
  if (count < 1) throw UsageError("candidate count must be >= 1");
  if (!(cfg.noise_fraction >= 0.0)) throw ConfigError("noise fraction must be >= 0");
  const int order = basis.order();
  const double extent = (scn.workspace.max - scn.workspace.min).maxCoeff();
  const double sigma = cfg.noise_fraction * extent;
  const TrajectoryCoefficients line = straight_line(scn, order);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  CandidateBatch batch;
  batch.source = CandidateSource::kNaivePrior;
  batch.candidates.reserve(count);
  for (int c = 0; c < count; ++c) {
    TrajectoryCoefficients cand = line;
    for (int i = 0; i < scn.n; ++i) {
      for (int ax = 0; ax < scn.n_d; ++ax) {
        for (int j = kPinned; j < order - kPinned; ++j) cand(i, ax, j) += sigma * noise(rng);
      }
    }
    batch.candidates.push_back(std::move(cand));
  }
  batch.scores.resize(batch.candidates.size());
  return batch;
}

nlohmann::json candidates_to_json(const std::vector<TrajectoryCoefficients>& candidates) {
  if (candidates.empty()) throw UsageError("cannot write an empty candidate file");
  nlohmann::json doc;
  doc["version"] = kCandidateVersion;
  doc["n"] = candidates.front().num_robots();
  doc["n_d"] = candidates.front().dims();
  doc["n_xi"] = candidates.front().order();
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& c : candidates) {
    if (!c.same_shape(candidates.front())) throw ShapeError("candidates differ in shape");
    samples.push_back(flat_json(c));
  }
  doc["samples"] = std::move(samples);
  return doc;
}

void save_candidates(const std::vector<TrajectoryCoefficients>& candidates,
                     const std::filesystem::path& path) {
  write_text_file(path, dump_json(candidates_to_json(candidates)));
}

CandidateBatch candidates_from_json(const nlohmann::json& doc, const Scenario& scn) {
  check_dims("candidate file", doc, scn, true);
  const auto samples = doc.find("samples");
  if (samples == doc.end() || !samples->is_array()) {
    throw ParseError("candidate file: missing required field \"samples\"");
  }
  if (samples->empty()) throw ValidationError("candidate file: no samples");
  CandidateBatch batch;
  batch.source = CandidateSource::kFlowFile;
  for (const auto& s : *samples) batch.candidates.push_back(parse_flat("candidate file", s, scn));
  batch.scores.resize(batch.candidates.size());
  return batch;
}

CandidateBatch load_candidates(const std::filesystem::path& path, const Scenario& scn) {
  return candidates_from_json(read_json_file(path), scn);
}

std::vector<WarmStart> warmstarts_from_json(const nlohmann::json& doc, const Scenario& scn) {
  // Warm-start files may omit the dims; they inherit them from the candidates.
  check_dims("warm-start file", doc, scn, false);
  const auto entries = doc.find("entries");
  if (entries == doc.end() || !entries->is_array()) {
    throw ParseError("warm-start file: missing required field \"entries\"");
  }
  std::vector<WarmStart> out;
  for (const auto& e : *entries) {
    if (!e.is_object() || !e.contains("xi0") || !e.contains("lambda0")) {
      throw ParseError("warm-start file: every entry needs \"xi0\" and \"lambda0\"");
    }
    out.push_back({parse_flat("warm-start file", e.at("xi0"), scn),
                   parse_flat("warm-start file", e.at("lambda0"), scn),
                   WarmStartProvenance::kFromInitNetFile});
  }
  return out;
}

std::vector<WarmStart> load_warmstarts(const std::filesystem::path& path, const Scenario& scn) {
  return warmstarts_from_json(read_json_file(path), scn);
}

nlohmann::json warmstarts_to_json(const std::vector<WarmStart>& entries) {
  nlohmann::json doc;
  doc["version"] = kWarmStartVersion;
  if (!entries.empty()) {
    doc["n"] = entries.front().xi0.num_robots();
    doc["n_d"] = entries.front().xi0.dims();
    doc["n_xi"] = entries.front().xi0.order();
  }
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"xi0", flat_json(e.xi0)}, {"lambda0", flat_json(e.lambda0)}});
  }
  doc["entries"] = std::move(arr);
  return doc;
}

void save_warmstarts(const std::vector<WarmStart>& entries, const std::filesystem::path& path) {
  write_text_file(path, dump_json(warmstarts_to_json(entries)));
}

void PlanConfig::validate() const {
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (!(separation_margin >= 0.0)) throw ConfigError("separation margin must be >= 0");
  solver.validate();
}

const RefinedCandidate& PlanResult::selected_refinement() const {
  for (const auto& r : refined) {
    if (r.candidate == selected) return r;
  }
  throw UsageError("plan result has no selection");
}

PlanResult plan(const Scenario& scn, CandidateBatch batch, const PlanConfig& cfg,
                const std::vector<WarmStart>* warm) {
  cfg.validate();
  if (batch.candidates.empty()) throw UsageError("candidate batch is empty");
  if (static_cast<std::size_t>(cfg.top_k) > batch.size()) {
    throw UsageError("top_k (" + std::to_string(cfg.top_k) + ") exceeds the batch size (" +
                     std::to_string(batch.size()) + ")");
  }
  if (warm && warm->size() != batch.size()) {
    throw ValidationError("warm-start file has " + std::to_string(warm->size()) +
                          " entries for " + std::to_string(batch.size()) + " candidates");
  }
  const BasisMatrices basis = build_basis(scn.horizon);
  auto sys = std::make_shared<const ConstraintSystem>(assemble(scn, basis, cfg.separation_margin));
  for (const auto& c : batch.candidates) {
    if (c.num_robots() != scn.n || c.dims() != scn.n_d || c.order() != basis.order()) {
      throw ShapeError("candidate does not match the scenario dims");
    }
  }
  batch.scores.assign(batch.size(), CandidateScore{});

  // Stage 1: rank by the residual of the extracted spherical reconstruction.
  for (std::size_t c = 0; c < batch.size(); ++c) {
    batch.scores[c].pre_residual =
        primal_residual(*sys, batch.candidates[c].stacked(), cfg.solver.d_max);
  }
  PlanResult out;
  out.ranking.resize(batch.size());
  std::iota(out.ranking.begin(), out.ranking.end(), 0);
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](int x, int y) {
    return batch.scores[x].pre_residual < batch.scores[y].pre_residual;
  });

  // Stage 2: refine the top_k in one batch.
  std::vector<SolverState> inits;
  std::vector<ObjectiveMode> modes;
  for (int r = 0; r < cfg.top_k; ++r) {
    const int c = out.ranking[r];
    const auto& cand = batch.candidates[c];
    if (warm) {
      const WarmStart& w = (*warm)[c];
      inits.push_back(initial_state(*sys, w.xi0, w.lambda0, cfg.solver.d_max));
    } else {
      inits.push_back(initial_state(*sys, cand, cfg.solver.d_max));
    }
    modes.push_back(ObjectiveMode::projection(cand));
  }
  FixedPointSolver solver(sys, ObjectiveMode::Kind::kProjection, cfg.solver);
  auto results = solver.solve_batch(std::move(inits), modes);

  for (int r = 0; r < cfg.top_k; ++r) {
    RefinedCandidate rc;
    rc.candidate = out.ranking[r];
    rc.coefficients = results[r].state.coefficients(scn.n, basis.order());
    rc.smoothness = smoothness_metric(rc.coefficients, basis);
    rc.result = std::move(results[r]);
    batch.scores[rc.candidate].post_residual = rc.result.final_primal();
    batch.scores[rc.candidate].smoothness = rc.smoothness;
    out.refined.push_back(std::move(rc));
  }

  // Stage 3: smoothest feasible result, else the lowest residual.
  const RefinedCandidate* best = nullptr;
  for (const auto& rc : out.refined) {
    if (!(rc.result.final_primal() < cfg.solver.primal_tol)) continue;
    if (!best || rc.smoothness < best->smoothness ||
        (rc.smoothness == best->smoothness && rc.candidate < best->candidate)) {
      best = &rc;
    }
  }
  out.status = PlanStatus::kFeasible;
  if (!best) {
    out.status = PlanStatus::kInfeasibleBestEffort;
    for (const auto& rc : out.refined) {
      const double p = rc.result.final_primal();
      if (!best || p < best->result.final_primal() ||
          (p == best->result.final_primal() && rc.candidate < best->candidate)) {
        best = &rc;
      }
    }
  }
  out.selected = best->candidate;
  out.best = best->coefficients;
  out.batch = std::move(batch);
  return out;
}

}  // namespace mrtraj
