#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mrtraj/error.hpp"
#include "mrtraj/scenario.hpp"

namespace mrtraj {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mrtraj_scenario_tests";
  fs::create_directories(dir);
  return dir / name;
}

double min_pairwise(const Eigen::MatrixXd& pts) {
  double m = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pts.rows(); ++j) m = std::min(m, (pts.row(i) - pts.row(j)).norm());
  }
  return m;
}

TEST(Generate, CircleGoalsAreAntipodal) {
  ScenarioFamily fam;
  fam.kind = FamilyKind::kCircleAntipodal;
  const Scenario scn = generate(fam, 4, 2, 0);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(scn.goals.row(i), (-scn.starts.row(i)).eval());
    EXPECT_NEAR(scn.starts.row(i).norm(), 1.0, 1e-15);
  }
}

TEST(Generate, RandomBoxRespectsSeparation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scenario scn = generate(ScenarioFamily{}, 8, 2, seed);
    EXPECT_EQ(scn.contact_a(), 0.2);
    EXPECT_GE(min_pairwise(scn.starts), 0.2);
    EXPECT_GE(min_pairwise(scn.goals), 0.2);
    EXPECT_LE(scn.starts.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_LE(scn.goals.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_NO_THROW(scn.validate());
  }
}

TEST(Generate, Deterministic) {
  ScenarioFamily fam;
  fam.obstacle_count = 3;
  const Scenario a = generate(fam, 6, 3, 42);
  const Scenario b = generate(fam, 6, 3, 42);
  EXPECT_EQ(a, b);
  EXPECT_EQ(dump_json(scenario_to_json(a)), dump_json(scenario_to_json(b)));
  EXPECT_NE(a, generate(fam, 6, 3, 43));
}

TEST(Generate, WithObstaclesPassesValidation) {
  ScenarioFamily fam;
  fam.obstacle_count = 8;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Scenario scn = generate(fam, 4, 2, seed);
    EXPECT_EQ(scn.obstacles.size(), 8u);
    EXPECT_NO_THROW(scn.validate());
  }
}

TEST(Generate, InfeasibleDensityNamesConstraint) {
  ScenarioFamily fam;
  fam.kind = FamilyKind::kCircleAntipodal;
  try {
    generate(fam, 100, 2, 0);
    FAIL() << "expected GenerationError";
  } catch (const GenerationError& e) {
    EXPECT_NE(std::string(e.what()).find("separation"), std::string::npos);
  }
  ScenarioFamily box;
  box.max_attempts = 50;
  EXPECT_THROW(generate(box, 400, 2, 0), GenerationError);
}

TEST(Generate, UnknownFamilyIsUsageError) {
  EXPECT_THROW(ScenarioFamily::parse_kind("spiral"), UsageError);
  EXPECT_EQ(ScenarioFamily::parse_kind("circle"), FamilyKind::kCircleAntipodal);
  EXPECT_EQ(ScenarioFamily::parse_kind("random_box"), FamilyKind::kRandomBox);
}

TEST(ScenarioIo, RoundTripIsExact) {
  ScenarioFamily fam;
  fam.obstacle_count = 2;
  for (int nd : {2, 3}) {
    Scenario scn = generate(fam, 5, nd, 7);
    scn.obstacles[0].velocity = Eigen::VectorXd::Constant(nd, 0.1 / 3.0);
    scn.starts(0, 0) = 0.1 + 0.2;  // not representable as a short decimal
    const fs::path path = temp_file("roundtrip_" + std::to_string(nd) + ".json");
    save_scenario(scn, path);
    const Scenario back = load_scenario(path);
    EXPECT_EQ(back, scn);
  }
}

TEST(ScenarioIo, MissingFieldNamed) {
  nlohmann::json doc = scenario_to_json(generate(ScenarioFamily{}, 2, 2, 1));
  doc.erase("starts");
  try {
    scenario_from_json(doc);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("\"starts\""), std::string::npos) << e.what();
  }
}

TEST(ScenarioIo, StartOutsideWorkspaceIsValidationError) {
  nlohmann::json doc = scenario_to_json(generate(ScenarioFamily{}, 2, 2, 1));
  doc["starts"][0][0] = 5.0;
  EXPECT_THROW(scenario_from_json(doc), ValidationError);
}

TEST(ScenarioIo, OverlappingGoalsIsValidationError) {
  nlohmann::json doc = scenario_to_json(generate(ScenarioFamily{}, 2, 2, 1));
  doc["goals"][1] = doc["goals"][0];
  EXPECT_THROW(scenario_from_json(doc), ValidationError);
}

TEST(ScenarioIo, WrongVersionAndShapes) {
  nlohmann::json doc = scenario_to_json(generate(ScenarioFamily{}, 2, 2, 1));
  nlohmann::json v2 = doc;
  v2["version"] = 2;
  EXPECT_THROW(scenario_from_json(v2), ParseError);
  nlohmann::json rows = doc;
  rows["starts"].erase(0);
  EXPECT_THROW(scenario_from_json(rows), ParseError);
}

TEST(ScenarioIo, MalformedFileReportsLine) {
  const fs::path path = temp_file("malformed.json");
  std::ofstream(path) << "{\n  \"version\": 1,\n  \"n\": 2,\n  oops\n}\n";
  try {
    load_scenario(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
  }
}

TEST(ScenarioIo, MissingFileIsIoError) {
  EXPECT_THROW(load_scenario(temp_file("does_not_exist.json")), IoError);
}

TEST(ScenarioIo, HorizonKeysFollowSchema) {
  Scenario scn = generate(ScenarioFamily{}, 2, 2, 1);
  const nlohmann::json doc = scenario_to_json(scn);
  EXPECT_EQ(doc.at("version"), 1);
  EXPECT_EQ(doc.at("horizon").at("n_xi"), scn.horizon.order);
  EXPECT_EQ(doc.at("horizon").at("K"), scn.horizon.num_steps - 1);
  EXPECT_EQ(doc.at("horizon").at("T"), scn.horizon.duration);
  for (const char* key : {"n", "n_d", "radii", "starts", "goals", "obstacles", "workspace", "seed"}) {
    EXPECT_TRUE(doc.contains(key)) << key;
  }
}

TEST(Obstacle, PositionAtTime) {
  Obstacle ob;
  ob.center = Eigen::Vector2d(1.0, -1.0);
  ob.velocity = Eigen::Vector2d(0.5, 0.25);
  EXPECT_TRUE(ob.position_at(2.0).isApprox(Eigen::Vector2d(2.0, -0.5)));
}

}  // namespace
}  // namespace mrtraj
