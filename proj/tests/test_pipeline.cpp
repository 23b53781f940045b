#include "rulkit/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace rulkit;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  return line;
}

class Pipeline : public ::testing::Test {
 protected:
  static fs::path root() { return fs::temp_directory_path() / ("rulkit_pipeline_" + std::to_string(::getpid())); }

  static ExperimentConfig config(const std::string& out) {
    ExperimentConfig cfg;
    cfg.data_dir = (root() / "data").string();
    cfg.out_dir = (root() / out).string();
    cfg.net.hidden_dim = 6;
    cfg.net.horizon = 20;
    cfg.net.conv_filters = {4, 6};
    cfg.net.epochs = 2;
    cfg.pair_stride = 20;
    cfg.prognosis.n_curves = 40;
    cfg.eval_subsets = {"FD001"};
    return cfg;
  }

  static void SetUpTestSuite() {
    fs::remove_all(root());
    std::ostringstream log;
    cmd_synth((root() / "data").string(), {{"FD002", 10}, {"FD001", 4}}, 3, log);
  }
  static void TearDownTestSuite() { fs::remove_all(root()); }
};

}  // namespace

TEST_F(Pipeline, IngestIsDeterministic) {
  std::ostringstream log;
  const auto a = config("ingest_a"), b = config("ingest_b");
  cmd_ingest(a, log);
  cmd_ingest(b, log);
  EXPECT_EQ(slurp(a.out() / "hi" / "train.tsv"), slurp(b.out() / "hi" / "train.tsv"));
  EXPECT_EQ(slurp(a.out() / "hi_model.json"), slurp(b.out() / "hi_model.json"));
  EXPECT_TRUE(fs::exists(a.out() / "hi" / "FD002-heldout.tsv"));
  EXPECT_TRUE(fs::exists(a.out() / "hi" / "FD001-test.offsets.tsv"));
}

TEST_F(Pipeline, MissingInputNamesThePath) {
  auto cfg = config("missing");
  cfg.data_dir = (root() / "nowhere").string();
  std::ostringstream log;
  try {
    cmd_ingest(cfg, log);
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("nowhere"), std::string::npos) << e.what();
  }
}

TEST_F(Pipeline, EndToEnd) {
  const auto cfg = config("full");
  std::ostringstream log;
  cmd_ingest(cfg, log);
  cmd_train(cfg, log);

  const auto tm = load_trained(cfg);
  ASSERT_TRUE(tm.net);
  EXPECT_EQ(tm.net_noise.phi0, 1.0);
  EXPECT_GT(tm.wiener.phi0, 0.0);
  EXPECT_EQ(first_line(cfg.out() / "noise_params.tsv"), cfg.artifact_header());

  const auto again = config("full_again");
  cmd_ingest(again, log);
  cmd_train(again, log);
  EXPECT_EQ(slurp(cfg.out() / "model.ckpt"), slurp(again.out() / "model.ckpt"));

  EXPECT_THROW(cmd_predict_one(cfg, "FD002-heldout", 0, 5, Method::wiener, log), std::invalid_argument);
  const auto set = load_eval_set(cfg, "FD002-heldout");
  const int unit = set.units.front().unit_id;
  try {
    cmd_predict_one(cfg, "FD002-heldout", unit, 10, Method::adaptive_wiener, log);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("warmup"), std::string::npos);
  }
  const auto p = cmd_predict_one(cfg, "FD002-heldout", unit, 25, Method::adaptive_dnn, log);
  EXPECT_GE(p.predicted_rul, 0.0);
  EXPECT_TRUE(fs::exists(cfg.out() / "predict"));

  EXPECT_THROW(cmd_evaluate(cfg, "", log), std::runtime_error);

  cmd_predict_all(cfg, "", log);
  EXPECT_EQ(first_line(cfg.out() / "predictions" / "FD001-test.tsv"), cfg.artifact_header());
  const auto evals = cmd_evaluate(cfg, "", log);
  ASSERT_EQ(evals.size(), 2u);
  for (const auto& ev : evals) {
    ASSERT_EQ(ev.rows.size(), 4u);
    for (const auto& row : ev.rows) {
      EXPECT_GT(row.count, 0u);
      EXPECT_EQ(row.picp.has_value(), row.method != Method::dnn);
      EXPECT_EQ(row.mpiw.has_value(), row.method != Method::dnn);
    }
    EXPECT_EQ(ev.checks.size(), 4u);
  }
  EXPECT_TRUE(fs::exists(cfg.out() / "tables" / "FD002-heldout.txt"));
  EXPECT_NE(slurp(cfg.out() / "tables" / "FD001-test.txt").find("dnn"), std::string::npos);
}

TEST_F(Pipeline, ConfigHashIgnoresOutDir) {
  auto a = config("x"), b = config("y");
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 43;
  EXPECT_NE(a.hash(), b.hash());
  nlohmann::json j = a;
  j["bogus"] = 1;
  EXPECT_THROW(j.get<ExperimentConfig>(), std::invalid_argument);
  const auto back = nlohmann::json(a).get<ExperimentConfig>();
  EXPECT_EQ(back.hash(), a.hash());
}
