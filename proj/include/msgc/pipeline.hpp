#pragma once

// End-to-end wiring: raw inputs -> graph, correlations, embeddings -> model runs, plus the
// robustness experiments and file outputs used by the command-line tool.

#include <optional>
#include <string>
#include <vector>

#include "msgc/checkpoint.hpp"
#include "msgc/config.hpp"
#include "msgc/data.hpp"
#include "msgc/graph.hpp"
#include "msgc/network.hpp"
#include "msgc/training.hpp"

namespace msgc {

/// Raw inputs of a run.
struct Inputs {
  SeriesTable table;
  Matrix distances;                     // metres, +inf when unknown
  std::optional<Matrix> travel_time;    // complete minutes matrix; wins over everything else
  std::string travel_time_file;         // partial override applied on top of derived times
  std::optional<Matrix> spatial_embedding;   // precomputed SP
  std::optional<Matrix> temporal_embedding;  // precomputed TP
};

struct InputPaths {
  std::string readings;
  std::string nodes;
  std::string distances;
  std::string travel_time;         // optional
  std::string spatial_embedding;   // optional
  std::string temporal_embedding;  // optional
  bool directed = false;
};

Inputs load_inputs(const InputPaths& paths);
Inputs inputs_from_synth(const SynthResult& synth);

/// Everything derived from the inputs before training.
struct Experiment {
  PreparedData data;
  TrafficGraph graph;
  Matrix trend;          // adjacent trend scores, before normalization
  double mean_speed_kmh = 0.0;
  FixedInputs fixed;
};

/// Travel times default to distance over the training-split mean of feature 0 (km/h)
/// unless the config fixes a speed or the inputs carry explicit times.
Experiment build_experiment(const Inputs& inputs, const ModelConfig& config);

/// Embeddings for a graph/table pair, both seeded from config.seed.
Matrix compute_spatial_embedding(const Matrix& adjacency, const ModelConfig& config);
Matrix compute_temporal_embedding(std::size_t slots_per_day, const ModelConfig& config);

/// Builds, trains and returns the best model together with its final training state.
struct TrainedRun {
  Experiment experiment;
  Model model;
  TrainState state;
};
TrainedRun train_run(const Inputs& inputs, const ModelConfig& config, const TrainOptions& options = {});

/// Model and HA metrics on a split, with the prediction tables they were computed from.
struct Evaluation {
  Predictions model;
  Predictions ha;
  MetricsReport model_report;
  MetricsReport ha_report;
};
Evaluation evaluate(const Model& model, const PreparedData& data, Split split, const SeriesTable* truth = nullptr);

/// Rebuilds windows for new data under a checkpoint's configuration and normalizer.
PreparedData prepare_for_checkpoint(const Checkpoint& checkpoint, SeriesTable table);

// ---------------------------------------------------------------------------------------------
// Outputs

std::string metrics_json(const Evaluation& evaluation, Split split);
/// Columns window_start,step,timestamp,node_id,feature,predicted,truth,observed.
void write_predictions_csv(const std::string& path, const Predictions& predictions, const SeriesTable& table,
                           std::size_t input_steps);
/// Forecast of the Q steps after the last P steps of `table`, in the readings format.
SeriesTable forecast(const Model& model, const Normalizer& normalizer, const SeriesTable& table);

/// Dumps A, L, the adjacent trend scores, travel times and every reachability matrix.
std::vector<std::string> write_matrices(const std::string& dir, const Experiment& experiment);

// ---------------------------------------------------------------------------------------------
// Robustness experiments

enum class StressMode { Fault, Sparsity };

struct StressOptions {
  StressMode mode = StressMode::Fault;
  std::vector<double> levels;
  std::vector<std::uint64_t> seeds{0};
  bool test_only = false;  // fault mode: train on clean data, corrupt only the evaluated inputs
};

struct StressRun {
  double level = 0.0;
  std::uint64_t seed = 0;
  Metrics metrics;
};

struct StressRow {
  double level = 0.0;
  std::string metric;  // mae, rmse or mape
  double mean = 0.0;
  double std = 0.0;
  std::size_t runs = 0;
};

struct StressResult {
  std::vector<StressRun> runs;
  std::vector<StressRow> rows;  // sorted by level, then mae/rmse/mape
};

/// For each level and seed: corrupt or subsample the inputs, retrain (unless test_only)
/// and evaluate on the test split against the uncorrupted readings.
StressResult run_stress(const Inputs& inputs, const ModelConfig& config, const StressOptions& options);
void write_stress_csv(const std::string& path, StressMode mode, const StressResult& result);
void write_stress_runs_csv(const std::string& path, const StressResult& result);

// ---------------------------------------------------------------------------------------------
// Manifests

/// Hex SHA-256 of a file's bytes.
std::string file_digest(const std::string& path);

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  ModelConfig config;
  std::vector<std::string> inputs;
  std::vector<std::string> artifacts;
  double seconds = 0.0;
};

void write_manifest(const std::string& path, const Manifest& manifest);

}  // namespace msgc
