#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "featspace/cli.hpp"
#include "featspace/io.hpp"

namespace featspace {
namespace {

namespace fs = std::filesystem;

const std::string kSource = FEATSPACE_SOURCE_DIR;

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("featspace_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, ExitCodes) {
  const Invocation none = run({});
  EXPECT_EQ(none.code, kExitValidation);
  const Invocation unknown = run({"frobnicate"});
  EXPECT_EQ(unknown.code, kExitValidation);
  EXPECT_NE(unknown.err.find("Usage"), std::string::npos);
  const Invocation missing = run({"divide", "--head", path("absent.csv")});
  EXPECT_EQ(missing.code, kExitIo);
  const Invocation bad_k = run({"knn", "--features", path("absent.csv"), "--k", "4"});
  EXPECT_NE(bad_k.code, kExitOk);
}

TEST_F(CliTest, MalformedFileIsValidationError) {
  io::write_file(path("head.csv"), "class,w0,w1\na,1,zz\nb,0,1\n");
  const Invocation r = run({"divide", "--head", path("head.csv")});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

TEST_F(CliTest, CorrelatePrintsRho) {
  const Invocation r = run({"correlate", "--table", kSource + "/data/softmax_variants_ratios.csv", "--x", "C_R", "--y",
                     "S_R", "--target", "L_R"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("rho = -0.97"), std::string::npos) << r.out;
}

TEST_F(CliTest, DivideRecord) {
  const Invocation r = run({"--format", "record", "divide", "--head", kSource + "/data/three_class_2d_head.csv"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["subcommand"], "divide");
  EXPECT_EQ(j["result"]["differential_vectors"]["count"], 3);
}

TEST_F(CliTest, ShatterRecord) {
  const Invocation r = run({"--format", "record", "--seed", "4", "shatter", "--dim", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["seed"], 4);
  EXPECT_EQ(j["result"]["shattered_n_plus_1"], true);
}

TEST_F(CliTest, ReplayIsByteIdentical) {
  const std::string table = path("t.csv");
  io::write_file(table, "C_R,S_R,L_R\n1,2,3\n2,2,5\n3,1,4\n4,0.5,9\n");
  const Invocation first = run({"--format", "record", "-o", path("a.json"), "--manifest", path("m.json"), "correlate",
                         "--table", table, "--x", "C_R", "--target", "L_R"});
  ASSERT_EQ(first.code, kExitOk) << first.err;
  const Invocation again = run({"--replay", path("m.json"), "-o", path("b.json")});
  ASSERT_EQ(again.code, kExitOk) << again.err;
  EXPECT_EQ(io::read_file(path("a.json")), io::read_file(path("b.json")));

  io::write_file(table, "C_R,S_R,L_R\n1,2,3\n2,2,5\n3,1,4\n4,0.5,10\n");
  const Invocation stale = run({"--replay", path("m.json")});
  EXPECT_EQ(stale.code, kExitValidation);
  EXPECT_NE(stale.err.find("DigestMismatch"), std::string::npos);
}

TEST_F(CliTest, TrainExportFeedsMetrics) {
  io::write_file(path("cfg.json"), R"({"dataset": {"num_classes": 3, "input_dim": 5, "train_per_class": 10,
    "test_per_class": 10, "spread": 0.3}, "model": {"hidden": [8], "feature_dim": 4},
    "train": {"epochs": 3}})");
  const Invocation t = run({"train", "--config", path("cfg.json"), "--export", path("out")});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  for (const char* f : {"train_features.csv", "test_features.csv", "head.csv", "export.json"})
    EXPECT_TRUE(fs::exists(dir_ / "out" / f)) << f;
  const Invocation m = run({"metrics", "--train", path("out/train_features.csv"), "--test", path("out/test_features.csv"),
                     "--drop-zero"});
  EXPECT_TRUE(m.code == kExitOk || m.code == kExitValidation) << m.err;
}

TEST_F(CliTest, UnknownConfigKeyRejected) {
  io::write_file(path("cfg.json"), R"({"dataset": {"num_classes": 3, "typo": 1}})");
  const Invocation t = run({"train", "--config", path("cfg.json")});
  EXPECT_EQ(t.code, kExitValidation);
  EXPECT_NE(t.err.find("typo"), std::string::npos);
}

}  // namespace
}  // namespace featspace
