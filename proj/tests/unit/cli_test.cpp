#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliRun {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gd-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream(dir_ / name) << content;
  }

  CliRun run(const std::string& args) {
    const std::string cmd = "cd '" + dir_.string() + "' && '" GENDETECT_CLI "' " + args + " 2>/dev/null";
    FILE* p = ::popen(cmd.c_str(), "r");
    CliRun r;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }

  fs::path dir_;
};

constexpr const char* kText =
    "The lighthouse keeper logged every passing ship in a leather book. "
    "Storms came often that winter, and the lamp burned through each night.";

TEST_F(Cli, IngestIndexDetectRoundTrip) {
  write("g.txt", kText);
  auto r = run("ingest --corpus c.log --text-file g.txt --model m1 --timestamp 50 --json");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out).at("ids"), json::array({1}));
  ASSERT_EQ(run("index --corpus c.log --out c.vdx --json").code, 0);
  r = run("detect --method bm25 --index c.vdx --text-file g.txt --json");
  ASSERT_EQ(r.code, 0);
  const auto doc = json::parse(r.out);
  EXPECT_TRUE(doc.at("verdict").get<bool>());
  EXPECT_EQ(doc.at("matched_id"), 1);
  EXPECT_EQ(doc.at("threshold_source"), "calibrated-bundled");
  r = run("detect --method embed --index c.vdx --text-file g.txt --json --from 60");
  ASSERT_EQ(r.code, 0);
  EXPECT_FALSE(json::parse(r.out).at("verdict").get<bool>());
}

TEST_F(Cli, ExplicitAndCalibratedThresholds) {
  write("g.txt", kText);
  write("human.txt", "A farmer walked the fence line at dawn.\nRain fell on the tin roof all afternoon.\n");
  ASSERT_EQ(run("ingest --corpus c.log --text-file g.txt").code, 0);
  auto r = run("detect --corpus c.log --text-file g.txt --threshold 0.3 --json");
  EXPECT_EQ(json::parse(r.out).at("threshold_source"), "flag");
  EXPECT_DOUBLE_EQ(json::parse(r.out).at("threshold").get<double>(), 0.3);
  r = run("detect --corpus c.log --text-file g.txt --calibration human.txt --fpr 0.4 --json");
  EXPECT_EQ(json::parse(r.out).at("threshold_source"), "calibrated");
}

TEST_F(Cli, WatermarkGenerateThenDetect) {
  const auto gen = run("wm-generate --len 200 --seed 3 --json");
  ASSERT_EQ(gen.code, 0);
  write("wm.txt", json::parse(gen.out).at("text").get<std::string>());
  auto r = run("wm-detect --text-file wm.txt --json");
  ASSERT_EQ(r.code, 0);
  EXPECT_GT(json::parse(r.out).at("z").get<double>(), 4.0);
  const auto plain = run("wm-generate --len 200 --seed 3 --plain --json");
  write("plain.txt", json::parse(plain.out).at("text").get<std::string>());
  r = run("wm-detect --text-file plain.txt --json");
  EXPECT_LT(json::parse(r.out).at("z").get<double>(), 4.0);
}

TEST_F(Cli, CodesAndPerturb) {
  write("a.txt", "the quick brown fox jumps over the lazy dog");
  write("b.txt", "dog lazy over jumps fox brown quick");
  auto r = run("codes --src a.txt --tgt b.txt --json");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out).at("lexical"), 0);
  EXPECT_EQ(json::parse(r.out).at("order"), 100);
  write("p.txt", kText);
  r = run("perturb --text-file p.txt --rate 0.5 --seed 2 --json");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(json::parse(r.out).at("text").get<std::string>(), kText);
}

TEST_F(Cli, AlignEmitsBlocksAndExample) {
  write("p.txt", "Ships sailed at dawn. The harbor emptied. Gulls circled above.");
  write("q.txt", "At dawn the ships sailed. Gulls circled overhead. The harbor was empty.");
  auto r = run("align --src p.txt --tgt q.txt --sim f1 --json");
  ASSERT_EQ(r.code, 0);
  EXPECT_FALSE(json::parse(r.out).at("blocks").empty());
}

TEST_F(Cli, ErrorsExitNonZero) {
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("detect --method bm25 --text hello").code, 1);
  EXPECT_EQ(run("detect --method nope --text hello --corpus missing.log").code, 2);
  write("e.txt", "");
  EXPECT_NE(run("ingest --corpus c.log --text-file e.txt").code, 0);
  EXPECT_EQ(run("--help").code, 0);
}

}  // namespace
