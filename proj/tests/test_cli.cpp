#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "msgc/checkpoint.hpp"
#include "msgc/data.hpp"
#include "msgc/graph.hpp"
#include "support/temp_dir.hpp"

#ifdef MSGC_CLI_PATH

using namespace msgc;
using namespace msgc::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path& root() {
  static const fs::path dir = fs::temp_directory_path() / "msgc_cli_tests";
  return dir;
}

std::string at(const std::string& name) { return (root() / name).string(); }

// Runs the CLI with stdout/stderr captured to a log; returns the exit status.
int run_cli(const std::string& args) {
  const std::string cmd = std::string(MSGC_CLI_PATH) + " " + args + " >>" + at("log.txt") + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string data_args(const std::string& dir = "syn") {
  return "--readings " + at(dir + "/readings.csv") + " --nodes " + at(dir + "/nodes.txt") + " --distances " +
         at(dir + "/distances.csv");
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(root());
    fs::create_directories(root());
    std::ofstream(at("small.json")) << R"({"input_steps": 2, "output_steps": 2, "fusion_dim": 8,
      "spatial_emb_dim": 4, "temporal_emb_dim": 4, "semantic_dim": 8, "adjacent_dim": 8, "reach_dim": 8,
      "encoder_dim": 8, "decoder_dim": 8, "heads": 2, "linear_head": true, "batch_size": 32, "lr": 0.01,
      "embedding": {"walks_per_node": 2, "walk_length": 10, "epochs": 1}})";
    synth_status_ = run_cli("synth --out " + at("syn") + " --nodes 4 --days 10 --delta 60 --seed 3");
    train_status_ = run_cli("train " + data_args() + " --travel-time " + at("syn/travel_time.csv") + " --config " +
                            at("small.json") + " --epochs 2 --out " + at("run"));
  }
  static void TearDownTestSuite() { fs::remove_all(root()); }

  static int synth_status_;
  static int train_status_;
};

int Cli::synth_status_ = -1;
int Cli::train_status_ = -1;

}  // namespace

TEST_F(Cli, SynthWritesInputs) {
  ASSERT_EQ(synth_status_, 0);
  for (const char* f : {"nodes.txt", "distances.csv", "travel_time.csv", "readings.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::is_regular_file(root() / "syn" / f)) << f;
  }
  const auto ids = read_node_list(at("syn/nodes.txt"));
  EXPECT_EQ(ids.size(), 4u);
  EXPECT_EQ(ingest(at("syn/readings.csv"), ids).steps(), 10u * 24u);
}

TEST_F(Cli, TrainWritesArtifacts) {
  ASSERT_EQ(train_status_, 0);
  for (const char* f : {"checkpoint.json", "history.csv", "config.json", "manifest.json"}) {
    EXPECT_TRUE(fs::is_regular_file(root() / "run" / f)) << f;
  }
  const Checkpoint ck = load_checkpoint(at("run/checkpoint.json"));
  EXPECT_EQ(ck.config.max_epochs, 2u);
  EXPECT_TRUE(ck.config.linear_head);
  ASSERT_TRUE(ck.training.has_value());
  EXPECT_EQ(ck.training->history.size(), 2u);
  EXPECT_EQ(load_config(at("run/config.json")), ck.config);
  const json m = json::parse(read_file(at("run/manifest.json")));
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["artifacts"].size(), 3u);
}

TEST_F(Cli, EvaluateMetricsMatchPredictionFile) {
  ASSERT_EQ(train_status_, 0);
  ASSERT_EQ(run_cli("evaluate --checkpoint " + at("run/checkpoint.json") + " --readings " + at("syn/readings.csv") +
                    " --out " + at("eval")),
            0);
  const json metrics = json::parse(read_file(at("eval/metrics.json")));
  for (const auto& [file, key] : {std::pair{"predictions.csv", "model"}, std::pair{"ha_predictions.csv", "ha"}}) {
    std::ifstream in(at(std::string("eval/") + file));
    std::string line;
    std::getline(in, line);
    double abs_sum = 0.0, sq_sum = 0.0;
    std::size_t count = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> c;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) c.push_back(cell);
      ASSERT_EQ(c.size(), 8u);
      if (c[7] != "1") continue;
      const double e = std::stod(c[5]) - std::stod(c[6]);
      abs_sum += std::abs(e);
      sq_sum += e * e;
      ++count;
    }
    ASSERT_GT(count, 0u);
    const auto& overall = metrics[key]["overall"];
    EXPECT_EQ(overall["count"].get<std::size_t>(), count) << key;
    EXPECT_NEAR(abs_sum / count, overall["mae"].get<double>(), 1e-9) << key;
    EXPECT_NEAR(std::sqrt(sq_sum / count), overall["rmse"].get<double>(), 1e-9) << key;
  }
}

TEST_F(Cli, PredictWritesReadingsFormat) {
  ASSERT_EQ(train_status_, 0);
  ASSERT_EQ(run_cli("predict --checkpoint " + at("run/checkpoint.json") + " --readings " + at("syn/readings.csv") +
                    " --out " + at("forecast.csv")),
            0);
  const auto ids = read_node_list(at("syn/nodes.txt"));
  const SeriesTable out = ingest(at("forecast.csv"), ids);
  const SeriesTable in = ingest(at("syn/readings.csv"), ids);
  EXPECT_EQ(out.steps(), 2u);
  EXPECT_EQ(out.start(), in.timestamp(in.steps()));
}

TEST_F(Cli, ResumeContinuesTraining) {
  ASSERT_EQ(train_status_, 0);
  ASSERT_EQ(run_cli("train " + data_args() + " --resume " + at("run/checkpoint.json") + " --epochs 3 --out " +
                    at("resumed")),
            0);
  EXPECT_EQ(load_checkpoint(at("resumed/checkpoint.json")).training->history.size(), 3u);
  EXPECT_EQ(run_cli("train " + data_args() + " --resume " + at("run/checkpoint.json") +
                    " --set lr=0.5 --out " + at("bad_resume")),
            2);
}

TEST_F(Cli, MatricesAndEmbeddings) {
  ASSERT_EQ(synth_status_, 0);
  EXPECT_EQ(run_cli("matrices " + data_args() + " --config " + at("small.json") + " --out " + at("mat")), 0);
  EXPECT_TRUE(fs::is_regular_file(root() / "mat" / "adjacency.csv"));
  EXPECT_TRUE(fs::is_regular_file(root() / "mat" / "reachability_q2_p2.csv"));

  EXPECT_EQ(run_cli("embed --nodes " + at("syn/nodes.txt") + " --distances " + at("syn/distances.csv") +
                    " --slots-per-day 24 --config " + at("small.json") + " --out " + at("emb")),
            0);
  const Matrix sp = read_matrix_csv(at("emb/spatial_embedding.csv"));
  EXPECT_EQ(sp.rows(), 4u);
  EXPECT_EQ(sp.cols(), 4u);
  EXPECT_EQ(read_matrix_csv(at("emb/temporal_embedding.csv")).rows(), 7u * 24u);

  // Precomputed embeddings are accepted by train.
  EXPECT_EQ(run_cli("train " + data_args() + " --spatial-embedding " + at("emb/spatial_embedding.csv") +
                    " --temporal-embedding " + at("emb/temporal_embedding.csv") + " --config " + at("small.json") +
                    " --epochs 1 --out " + at("run_pre")),
            0);
}

TEST_F(Cli, StressWritesSummary) {
  ASSERT_EQ(synth_status_, 0);
  ASSERT_EQ(run_cli("stress " + data_args() + " --config " + at("small.json") +
                    " --epochs 1 --mode fault --levels 0,0.5 --out " + at("stress/fault.csv") + " --runs-out " +
                    at("stress/runs.csv")),
            0);
  std::ifstream in(at("stress/fault.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 1u + 2u * 3u);
  EXPECT_TRUE(fs::is_regular_file(root() / "stress" / "fault.csv.manifest.json"));
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("fly"), 2);
  EXPECT_EQ(run_cli("train --out " + at("x")), 2);
  EXPECT_EQ(run_cli("train " + data_args() + " --set hedas=2 --out " + at("x")), 2);
  EXPECT_EQ(run_cli("train " + data_args() + " --ablate gru --out " + at("x")), 2);
  EXPECT_EQ(run_cli("train " + data_args() + " --config " + at("none.json") + " --out " + at("x")), 2);
  EXPECT_EQ(run_cli("stress " + data_args() + " --mode fault --levels 0,abc --out " + at("x.csv")), 2);
  EXPECT_EQ(run_cli("stress " + data_args() + " --mode chaos --levels 0 --out " + at("x.csv")), 2);
  EXPECT_EQ(run_cli("evaluate --checkpoint " + at("run/checkpoint.json") + " --readings " + at("syn/readings.csv") +
                    " --split dev --out " + at("x")),
            2);
}

TEST_F(Cli, DataErrorsExitThree) {
  ASSERT_EQ(synth_status_, 0);
  EXPECT_EQ(run_cli("train --readings " + at("missing.csv") + " --nodes " + at("syn/nodes.txt") + " --distances " +
                    at("syn/distances.csv") + " --out " + at("x")),
            3);
  std::ofstream(at("garbage.csv")) << "timestamp,node_id,feature_0\nyesterday,n0,abc\n";
  EXPECT_EQ(run_cli("train --readings " + at("garbage.csv") + " --nodes " + at("syn/nodes.txt") + " --distances " +
                    at("syn/distances.csv") + " --out " + at("x")),
            3);
  std::ofstream(at("bad_ck.json")) << "{\"format\": \"msgc-checkpoint\"";
  EXPECT_EQ(run_cli("evaluate --checkpoint " + at("bad_ck.json") + " --readings " + at("syn/readings.csv") +
                    " --out " + at("x")),
            3);
}

TEST_F(Cli, NumericFailureExitsFour) {
  ASSERT_EQ(synth_status_, 0);
  // An absurd step size drives the parameters to overflow within the first epochs.
  EXPECT_EQ(run_cli("train " + data_args() + " --config " + at("small.json") +
                    " --set lr=1e300 --set stall=0 --set patience=0 --epochs 20 --out " + at("diverged")),
            4);
}

#endif
