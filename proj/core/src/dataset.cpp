#include "mrtraj/dataset.hpp"

#include <fstream>
#include <memory>
#include <random>
#include <string>

#include "mrtraj/error.hpp"
#include "mrtraj/pipeline.hpp"

namespace mrtraj {

namespace {
constexpr int kDatasetVersion = 1;
}

nlohmann::json record_to_json(const DatasetRecord& record) {
  const auto flat = record.coefficients.flat();
  nlohmann::json doc;
  doc["version"] = kDatasetVersion;
  doc["scenario"] = scenario_to_json(record.scenario);
  doc["n_xi"] = record.coefficients.order();
  doc["coefficients"] = std::vector<double>(flat.begin(), flat.end());
  doc["primal_residual"] = record.primal_residual;
  doc["separation_margin"] = record.separation_margin;
  return doc;
}

DatasetRecord record_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("dataset record: expected an object");
  for (const char* key : {"version", "scenario", "coefficients"}) {
    if (!doc.contains(key)) {
      throw ParseError(std::string("dataset record: missing required field \"") + key + "\"");
    }
  }
  if (doc.at("version") != kDatasetVersion) {
    throw ParseError("dataset record: unsupported version " + doc.at("version").dump());
  }
  DatasetRecord rec;
  rec.scenario = scenario_from_json(doc.at("scenario"));
  const auto& coeffs = doc.at("coefficients");
  if (!coeffs.is_array()) throw ParseError("dataset record: coefficients must be an array");
  std::vector<double> flat;
  try {
    flat = coeffs.get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError("dataset record: coefficients must be numbers");
  }
  const int order = rec.scenario.horizon.order;
  const std::size_t expected =
      static_cast<std::size_t>(rec.scenario.n) * rec.scenario.n_d * static_cast<std::size_t>(order);
  if (flat.size() != expected) {
    throw ValidationError("dataset record: coefficient count mismatch (expected " +
                          std::to_string(expected) + ", got " + std::to_string(flat.size()) + ")");
  }
  rec.coefficients =
      TrajectoryCoefficients(rec.scenario.n, rec.scenario.n_d, order, std::move(flat));
  rec.primal_residual = doc.value("primal_residual", 0.0);
  rec.separation_margin = doc.value("separation_margin", 0.0);
  return rec;
}

DatasetSummary gen_dataset(const ScenarioFamily& family, int n, int n_d, int count,
                           std::uint64_t seed, const DatasetConfig& cfg,
                           const std::filesystem::path& out_path) {
  if (count < 0) throw UsageError("dataset count must be >= 0");
  if (cfg.retries < 0) throw ConfigError("retries must be >= 0");
  cfg.solver.validate();
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open \"" + out_path.string() + "\" for writing");

  DatasetSummary summary;
  for (int i = 0; i < count; ++i) {
    ++summary.attempted;
    const std::uint64_t inst_seed = seed + static_cast<std::uint64_t>(i);
    Scenario scn;
    try {
      scn = generate(family, n, n_d, inst_seed);
    } catch (const GenerationError&) {
      continue;
    }
    const BasisMatrices basis = build_basis(scn.horizon);
    auto sys = std::make_shared<const ConstraintSystem>(assemble(scn, basis, cfg.separation_margin));
    FixedPointSolver solver(sys, ObjectiveMode::Kind::kSmoothness, cfg.solver);
    const ObjectiveMode mode = ObjectiveMode::smoothness();

    // First attempt from the straight line, then perturbed lines.
    const CandidateBatch starts =
        sample_naive_prior(scn, basis, cfg.retries + 1, inst_seed,
                           NaivePriorConfig{cfg.retry_noise_fraction});
    std::vector<TrajectoryCoefficients> inits{straight_line(scn, basis.order())};
    for (int r = 0; r < cfg.retries; ++r) inits.push_back(starts.candidates[r]);

    for (const auto& init : inits) {
      const SolverResult res = solver.solve(initial_state(*sys, init, cfg.solver.d_max), mode);
      const double primal = primal_residual(*sys, res.state.xi, cfg.solver.d_max);
      if (!(primal < cfg.solver.primal_tol)) continue;
      DatasetRecord rec{scn, res.state.coefficients(scn.n, basis.order()), primal,
                        cfg.separation_margin};
      out << record_to_json(rec).dump() << '\n';
      ++summary.written;
      break;
    }
  }
  out.flush();
  if (!out) throw IoError("failed writing \"" + out_path.string() + "\"");
  return summary;
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open \"" + path.string() + "\"");
  std::vector<DatasetRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      records.push_back(record_from_json(doc));
    } catch (const Error& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

double replay_residual(const DatasetRecord& record, double d_max) {
  const BasisMatrices basis = build_basis(record.scenario.horizon);
  const ConstraintSystem sys = assemble(record.scenario, basis, record.separation_margin);
  return primal_residual(sys, record.coefficients.stacked(), d_max);
}

}  // namespace mrtraj
