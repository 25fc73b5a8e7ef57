#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "spe/cli.hpp"
#include "temp_dir.hpp"

namespace spe {
namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// One small feature-mode pipeline shared by the tests below.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir;
    const auto d = dir_->path().string();
    ASSERT_EQ(run({"gen-data", "--feature-mode", "--per-class", "40", "--seed", "3", "--out", d + "/data"}).code, 0);
    const std::vector<std::string> train{"train",          "--data",  d + "/data", "--hidden",   "16",
                                         "--max-epochs",   "2",       "--episodes-per-epoch",    "5",
                                         "--val-episodes", "5",       "--eval-samples",          "10",
                                         "--lr",           "0.01",    "--quiet"};
    auto spe = train;
    spe.insert(spe.end(), {"--out", d + "/spe"});
    ASSERT_EQ(run(spe).code, 0);
    auto pn = train;
    pn.insert(pn.end(), {"--model", "pn", "--out", d + "/pn"});
    ASSERT_EQ(run(pn).code, 0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string path(const std::string& name) { return (dir_->path() / name).string(); }

  static testing::TempDir* dir_;
};

testing::TempDir* CliPipeline::dir_ = nullptr;

TEST_F(CliPipeline, WritesExpectedFiles) {
  for (const char* f : {"data/manifest.txt", "data/pixels.f32", "data/labels.u16", "data/gen-data.ini",
                        "spe/model.manifest", "spe/model.params.f32", "spe/training_log.csv", "spe/train.ini"}) {
    EXPECT_TRUE(std::filesystem::exists(path(f))) << f;
  }
  EXPECT_EQ(bytes(path("spe/training_log.csv")).substr(0, 12), "epoch,episod");
}

TEST_F(CliPipeline, ConfigRerunIsByteIdentical) {
  const auto first = bytes(path("spe/model.params.f32"));
  const auto log = bytes(path("spe/training_log.csv"));
  const auto ini = bytes(path("spe/train.ini"));
  ASSERT_EQ(run({"train", "--config", path("spe/train.ini")}).code, 0);
  EXPECT_EQ(bytes(path("spe/model.params.f32")), first);
  EXPECT_EQ(bytes(path("spe/training_log.csv")), log);
  EXPECT_EQ(bytes(path("spe/train.ini")), ini);

  const auto pixels = bytes(path("data/pixels.f32"));
  ASSERT_EQ(run({"gen-data", "--config", path("data/gen-data.ini")}).code, 0);
  EXPECT_EQ(bytes(path("data/pixels.f32")), pixels);
}

TEST_F(CliPipeline, EvalAndPairedComparison) {
  const auto r = run({"eval", "--model-path", path("spe"), "--data", path("data"), "--out", path("eval"),
                      "--episodes", "12", "--eval-samples", "10", "--compare", "pn", "--compare-model-path",
                      path("pn"), "--verify"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = bytes(path("eval/eval_report.txt"));
  EXPECT_NE(report.find("sign_test_p"), std::string::npos);
  EXPECT_NE(report.find("regime"), std::string::npos);
  ASSERT_EQ(run({"eval", "--config", path("eval/eval.ini")}).code, 0);
  EXPECT_EQ(bytes(path("eval/eval_report.txt")), report);
}

TEST_F(CliPipeline, ThreadsDoNotChangeEvalReport) {
  const std::vector<std::string> base{"eval", "--model-path", path("spe"), "--data", path("data"), "--episodes", "12",
                                      "--eval-samples", "10"};
  auto one = base, four = base;
  one.insert(one.end(), {"--out", path("t1"), "--threads", "1"});
  four.insert(four.end(), {"--out", path("t4"), "--threads", "4"});
  ASSERT_EQ(run(one).code, 0);
  ASSERT_EQ(run(four).code, 0);
  EXPECT_EQ(bytes(path("t1/eval_report.txt")), bytes(path("t4/eval_report.txt")));
}

TEST_F(CliPipeline, ExportEmbeddings) {
  ASSERT_EQ(run({"export-embeddings", "--model-path", path("spe"), "--data", path("data"), "--out", path("emb")}).code,
            0);
  const auto csv = bytes(path("emb/embeddings.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 161);
}

TEST_F(CliPipeline, SweepRejectsFeatureModel) {
  EXPECT_EQ(run({"sweep", "--model-path", path("spe"), "--out", path("sweep")}).code, kExitConfig);
}

TEST(Cli, SweepOnPixelModel) {
  testing::TempDir dir;
  const auto d = dir.path().string();
  ASSERT_EQ(run({"gen-data", "--per-class", "10", "--image-size", "32", "--out", d + "/data"}).code, 0);
  ASSERT_EQ(run({"train", "--data", d + "/data", "--out", d + "/m", "--hidden", "8", "--max-epochs", "1",
                 "--episodes-per-epoch", "2", "--val-episodes", "2", "--eval-samples", "5", "--shots", "1",
                 "--queries", "1", "--quiet"})
                .code,
            0);
  const auto r = run({"sweep", "--model-path", d + "/m", "--out", d + "/s", "--noise", "leg", "--samples-per-level", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = bytes(dir / "s/sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(run({"sweep", "--model-path", d + "/m", "--out", d + "/s", "--noise", "leg", "--levels", "2"}).code, kExitConfig);
}

TEST(Cli, ExitCodes) {
  testing::TempDir dir;
  const auto d = dir.path().string();
  EXPECT_EQ(run({}).code, kExitConfig);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  EXPECT_EQ(run({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(run({"train", "--help"}).code, kExitOk);
  EXPECT_EQ(run({"train", "--out", d}).code, kExitConfig);
  EXPECT_EQ(run({"gen-data", "--out", d + "/x", "--per-class", "0"}).code, kExitConfig);
  EXPECT_EQ(run({"gen-data", "--out", d + "/x", "--noisy-fraction", "2"}).code, kExitConfig);
  EXPECT_EQ(run({"train", "--data", d + "/missing", "--out", d + "/m"}).code, kExitIo);
  EXPECT_EQ(run({"eval", "--model-path", d + "/missing", "--data", d, "--out", d + "/e"}).code, kExitIo);
  ASSERT_EQ(run({"gen-data", "--feature-mode", "--per-class", "10", "--out", d + "/data"}).code, 0);
  EXPECT_EQ(run({"train", "--data", d + "/data", "--out", d + "/m", "--model", "hib"}).code, kExitConfig);
  EXPECT_EQ(run({"train", "--data", d + "/data", "--out", d + "/m", "--ways", "9"}).code, kExitConfig);
}

}  // namespace
}  // namespace spe
