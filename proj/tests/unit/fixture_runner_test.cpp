#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fixture_runner.hpp"

namespace gendetect::fixtures {
namespace {

namespace fs = std::filesystem;

class FixtureRunner : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("gd-fx-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_ / "scratch");
    fs::copy(GENDETECT_FIXTURE_DIR, root_ / "fixtures", fs::copy_options::recursive);
    ctx_.fixture_dir = root_ / "fixtures";
    ctx_.scratch = root_ / "scratch";
  }
  void TearDown() override { fs::remove_all(root_); }

  json load(const std::string& file) { return json::parse(std::ifstream(ctx_.fixture_dir / file)); }
  void save(const std::string& file, const json& doc) { std::ofstream(ctx_.fixture_dir / file) << doc.dump(2); }

  // Only the library-level files; keeps these runs fast.
  void restrict_manifest(std::vector<std::string> files) { save("manifest.json", {{"files", files}}); }

  fs::path root_;
  Context ctx_;
};

TEST_F(FixtureRunner, CleanCopyPasses) {
  restrict_manifest({"text_normalize.json", "diversity_codes.json", "eval_harness.json"});
  const auto report = verify(default_registry(), ctx_);
  EXPECT_TRUE(report.ok()) << format_report(report);
  EXPECT_GT(report.passed, 10u);
}

TEST_F(FixtureRunner, CorruptedExpectationNamesFileAndCase) {
  restrict_manifest({"text_normalize.json"});
  auto doc = load("text_normalize.json");
  doc["cases"][0]["expected"] = {{"tokens", {"definitely", "wrong"}}};
  const std::string name = doc["cases"][0]["name"];
  save("text_normalize.json", doc);
  const auto report = verify(default_registry(), ctx_);
  ASSERT_EQ(report.failures.size(), 1u) << format_report(report);
  EXPECT_EQ(report.failures[0].file, "text_normalize.json");
  EXPECT_EQ(report.failures[0].case_name, name);
  EXPECT_NE(format_report(report).find(name), std::string::npos);
}

TEST_F(FixtureRunner, MissingFileIsAFailure) {
  restrict_manifest({"text_normalize.json", "does_not_exist.json"});
  const auto report = verify(default_registry(), ctx_);
  ASSERT_EQ(report.failures.size(), 1u);
  EXPECT_EQ(report.failures[0].file, "does_not_exist.json");
}

TEST_F(FixtureRunner, UnknownOperationIsAFailure) {
  restrict_manifest({"text_normalize.json"});
  auto doc = load("text_normalize.json");
  doc["cases"][0]["op"] = "no_such_op";
  save("text_normalize.json", doc);
  const auto report = verify(default_registry(), ctx_);
  ASSERT_EQ(report.failures.size(), 1u);
  EXPECT_NE(report.failures[0].message.find("no_such_op"), std::string::npos);
}

TEST_F(FixtureRunner, DerivedCaseWithoutNoteIsAFailure) {
  restrict_manifest({"text_normalize.json"});
  auto doc = load("text_normalize.json");
  doc["cases"][0]["origin"] = "derived";
  doc["cases"][0].erase("note");
  save("text_normalize.json", doc);
  EXPECT_FALSE(verify(default_registry(), ctx_).ok());
}

TEST_F(FixtureRunner, NewOperationWithoutFixtureWarns) {
  restrict_manifest({"text_normalize.json"});
  auto registry = default_registry();
  registry["brand_new_op"] = [](const json&, const Context&) { return json::object(); };
  const auto report = verify(registry, ctx_);
  EXPECT_TRUE(report.ok());
  bool warned = false;
  for (const auto& w : report.warnings) warned = warned || w.find("brand_new_op") != std::string::npos;
  EXPECT_TRUE(warned);
}

TEST(Matches, SubsetAndTolerance) {
  std::string where;
  EXPECT_TRUE(matches(json{{"a", 1.0}}, json{{"a", 1.0 + 1e-12}, {"b", 2}}, 1e-9, where));
  EXPECT_FALSE(matches(json{{"a", 1.0}}, json{{"a", 1.1}}, 1e-9, where));
  where.clear();
  EXPECT_FALSE(matches(json{{"a", json::array({1, 2})}}, json{{"a", json::array({1})}}, 0, where));
  EXPECT_NE(where.find("/a"), std::string::npos);
}

}  // namespace
}  // namespace gendetect::fixtures
