#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mrtraj/dataset.hpp"
#include "mrtraj/error.hpp"

namespace mrtraj {
namespace {

namespace fs = std::filesystem;

TEST(Dataset, GeneratesConvergedRecords) {
  const fs::path path = fs::temp_directory_path() / "mrtraj_dataset_test.jsonl";
  DatasetConfig cfg;
  const DatasetSummary sum = gen_dataset(ScenarioFamily{}, 2, 2, 50, 7, cfg, path);
  EXPECT_EQ(sum.attempted, 50);
  EXPECT_GE(sum.written, 45);
  const std::vector<DatasetRecord> records = load_dataset(path);
  ASSERT_EQ(static_cast<int>(records.size()), sum.written);
  for (const auto& rec : records) {
    EXPECT_LT(rec.primal_residual, cfg.solver.primal_tol);
    EXPECT_LT(replay_residual(rec), cfg.solver.primal_tol);
    EXPECT_EQ(rec.separation_margin, 0.1);
    EXPECT_EQ(rec.coefficients.num_robots(), 2);
    EXPECT_EQ(rec.coefficients.order(), rec.scenario.horizon.order);
  }
  std::ifstream in(path);
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, sum.written);
  fs::remove(path);
}

TEST(Dataset, RecordRoundTrip) {
  DatasetRecord rec;
  rec.scenario = generate(ScenarioFamily{}, 3, 3, 4);
  rec.coefficients = TrajectoryCoefficients(3, 3, 11);
  for (std::size_t k = 0; k < rec.coefficients.size(); ++k) {
    rec.coefficients.flat()[k] = 0.1 * static_cast<double>(k) / 3.0;
  }
  rec.primal_residual = 1.0 / 7.0;
  rec.separation_margin = 0.1;
  const nlohmann::json doc = record_to_json(rec);
  EXPECT_EQ(doc["version"], 1);
  EXPECT_EQ(doc["n_xi"], 11);
  const DatasetRecord back = record_from_json(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(back.scenario, rec.scenario);
  EXPECT_EQ(back.coefficients, rec.coefficients);
  EXPECT_EQ(back.primal_residual, rec.primal_residual);
  EXPECT_EQ(back.separation_margin, rec.separation_margin);

  nlohmann::json bad = doc;
  bad["coefficients"].erase(0);
  EXPECT_THROW(record_from_json(bad), Error);
  bad = doc;
  bad["version"] = 3;
  EXPECT_THROW(record_from_json(bad), Error);
}

TEST(Dataset, UnwritablePathRaisesIoError) {
  EXPECT_THROW(gen_dataset(ScenarioFamily{}, 2, 2, 1, 0, {},
                           "/nonexistent-dir/sub/out.jsonl"),
               IoError);
  EXPECT_THROW(load_dataset("/nonexistent-dir/none.jsonl"), IoError);
}

TEST(Dataset, MalformedLineReportsLineNumber) {
  const fs::path path = fs::temp_directory_path() / "mrtraj_dataset_bad.jsonl";
  const fs::path good = fs::temp_directory_path() / "mrtraj_dataset_good.jsonl";
  gen_dataset(ScenarioFamily{}, 2, 2, 1, 3, {}, good);
  std::string first;
  {
    std::ifstream in(good);
    std::getline(in, first);
  }
  {
    std::ofstream out(path);
    out << first << "\n{not json\n";
  }
  try {
    load_dataset(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  fs::remove(path);
  fs::remove(good);
}

}  // namespace
}  // namespace mrtraj
