#include <gtest/gtest.h>

#include "mrtraj/benchmark.hpp"
#include "mrtraj/error.hpp"

namespace mrtraj {
namespace {

BenchmarkConfig tiny_config() {
  BenchmarkConfig cfg;
  cfg.n_list = {2, 3};
  cfg.instances = 3;
  cfg.seed = 100;
  cfg.candidates = CandidateSpec::parse("naive:4");
  cfg.plan.top_k = 2;
  cfg.plan.solver.max_iters = 400;
  cfg.checkpoints = {0, 5, 100000};
  return cfg;
}

TEST(CandidateSpec, Parse) {
  CandidateSpec s = CandidateSpec::parse("naive:32");
  EXPECT_EQ(s.kind, CandidateSpec::Kind::kNaive);
  EXPECT_EQ(s.count, 32);
  EXPECT_EQ(s.describe(), "naive:32");
  s = CandidateSpec::parse("line");
  EXPECT_EQ(s.kind, CandidateSpec::Kind::kStraightLine);
  EXPECT_EQ(s.describe(), "line");
  for (const char* bad : {"naive:0", "naive:-3", "naive:x", "naive:", "flow", ""}) {
    EXPECT_THROW(CandidateSpec::parse(bad), UsageError) << bad;
  }
}

TEST(BenchmarkConfig, Validation) {
  BenchmarkConfig cfg = tiny_config();
  cfg.n_list.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.jobs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.thresholds = {0.0};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(PrimalAt, UsesLastValueWhenShort) {
  SolverResult r;
  EXPECT_TRUE(std::isnan(primal_at(r, 3)));
  r.state.trace = {{3.0, 0.0}, {2.0, 0.0}, {1.0, 0.0}};
  EXPECT_EQ(primal_at(r, 0), 3.0);
  EXPECT_EQ(primal_at(r, 1), 2.0);
  EXPECT_EQ(primal_at(r, 50), 1.0);
}

class BenchmarkRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { report = new BenchmarkReport(run_benchmark(tiny_config())); }
  static void TearDownTestSuite() { delete report; }
  static BenchmarkReport* report;
};
BenchmarkReport* BenchmarkRun::report = nullptr;

TEST_F(BenchmarkRun, RowsFollowConfiguration) {
  ASSERT_EQ(report->rows.size(), 6u);
  for (std::size_t t = 0; t < 6; ++t) {
    const BenchmarkRow& r = report->rows[t];
    EXPECT_EQ(r.n, t < 3 ? 2 : 3);
    EXPECT_EQ(r.instance, static_cast<int>(t % 3));
    EXPECT_EQ(r.seed, 100u + t % 3);
    EXPECT_NE(r.status, "error") << r.error;
    EXPECT_EQ(r.primal_at.size(), 3u);
    EXPECT_EQ(r.iterations_to.size(), 2u);
  }
}

TEST_F(BenchmarkRun, AggregatesRecomputeFromRows) {
  const auto again = aggregate_rows(report->config, report->rows);
  ASSERT_EQ(again.size(), 2u);
  const nlohmann::json a = report_to_json(*report, false)["aggregates"];
  BenchmarkReport copy = *report;
  copy.aggregates = again;
  EXPECT_EQ(report_to_json(copy, false)["aggregates"], a);

  for (const auto& agg : report->aggregates) {
    int successes = 0;
    double smooth = 0.0;
    for (const auto& r : report->rows) {
      if (r.n == agg.n && r.success) {
        ++successes;
        smooth += r.metrics.smoothness;
      }
    }
    EXPECT_EQ(agg.instances, 3);
    EXPECT_EQ(agg.successes, successes);
    EXPECT_DOUBLE_EQ(agg.success_rate, successes / 3.0);
    if (successes > 0) EXPECT_DOUBLE_EQ(*agg.mean_smoothness, smooth / successes);
    ASSERT_EQ(agg.median_primal_at.size(), 3u);
  }
}

TEST_F(BenchmarkRun, ReportFormats) {
  const nlohmann::json doc = report_to_json(*report);
  EXPECT_EQ(doc["version"], 1);
  EXPECT_TRUE(doc["aggregates"][0].contains("success_rate"));
  EXPECT_TRUE(doc["rows"][0].contains("wall_seconds"));
  EXPECT_FALSE(report_to_json(*report, false)["rows"][0].contains("wall_seconds"));
  EXPECT_EQ(doc["fingerprint"]["seed_set"], nlohmann::json({100, 101, 102}));
  EXPECT_EQ(doc["fingerprint"]["candidates"], "naive:4");
  const std::string csv = report_to_csv(*report, false);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_EQ(csv.find("wall"), std::string::npos);
}

TEST_F(BenchmarkRun, DeterministicAndIndependentOfJobs) {
  BenchmarkConfig cfg = tiny_config();
  cfg.jobs = 2;
  const BenchmarkReport parallel = run_benchmark(cfg);
  cfg.jobs = 1;
  const std::string base = report_to_json(*report, false).dump();
  EXPECT_EQ(report_to_json(run_benchmark(cfg), false).dump(), base);
  BenchmarkReport p = parallel;
  p.config.jobs = 1;
  EXPECT_EQ(report_to_json(p, false).dump(), base);
  EXPECT_EQ(report_to_csv(p, false), report_to_csv(*report, false));
}

TEST(Benchmark, FailuresAreRecordedNotThrown) {
  BenchmarkConfig cfg = tiny_config();
  cfg.n_list = {60};
  cfg.instances = 1;
  cfg.family.box_half_extent = 0.2;
  cfg.family.max_attempts = 5;
  const BenchmarkReport rep = run_benchmark(cfg);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.rows[0].status, "error");
  EXPECT_FALSE(rep.rows[0].error.empty());
  EXPECT_EQ(rep.aggregates[0].success_rate, 0.0);
  EXPECT_FALSE(rep.aggregates[0].mean_smoothness.has_value());
}

TEST(Benchmark, StraightLineCandidates) {
  BenchmarkConfig cfg = tiny_config();
  cfg.n_list = {2};
  cfg.instances = 2;
  cfg.candidates = CandidateSpec::parse("line");
  cfg.plan.top_k = 10;
  const BenchmarkReport rep = run_benchmark(cfg);
  for (const auto& r : rep.rows) {
    EXPECT_NE(r.status, "error") << r.error;
    EXPECT_EQ(r.selected, 0);
  }
}

}  // namespace
}  // namespace mrtraj
