#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "msgc/config.hpp"
#include "msgc/data.hpp"
#include "msgc/network.hpp"
#include "msgc/optim.hpp"
#include "msgc/rng.hpp"

namespace msgc {

/// Per-feature z-score statistics fitted on observed training cells.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;  // constant features get 1

  static Normalizer fit(const SeriesTable& table, std::size_t end_step);

  double apply(double x, std::size_t feature) const { return (x - mean[feature]) / std[feature]; }
  double inverse(double z, std::size_t feature) const { return z * std[feature] + mean[feature]; }
  bool operator==(const Normalizer&) const = default;
};

/// Masked mean absolute error over observed cells, in normalized space.
/// Throws ContractError when no cell is observed.
Tensor masked_mae(const std::vector<Tensor>& predictions, const std::vector<Tensor>& targets,
                  const std::vector<Tensor>& masks);

/// Probability of feeding the ground truth at iteration i: tau / (tau + exp(i / tau)).
double sampling_probability(std::uint64_t iteration, double tau);

// ---------------------------------------------------------------------------------------------
// Data preparation

/// A table with its split, normalizer and normalized copy (unobserved cells read as 0).
struct PreparedData {
  SeriesTable table;
  WindowedDataset dataset;
  Normalizer normalizer;
  std::vector<double> normalized;
};

PreparedData prepare_data(SeriesTable table, const ModelConfig& config);
/// Same, but with a normalizer fixed in advance (evaluation of a trained model).
PreparedData prepare_data(SeriesTable table, const ModelConfig& config, const Normalizer& normalizer);

/// Batch of the given windows (indices into data.dataset.windows).
Batch make_batch(const PreparedData& data, const std::vector<std::size_t>& window_ids, std::size_t output_features);

// ---------------------------------------------------------------------------------------------
// Metrics

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // percent
  std::size_t count = 0;
  std::size_t mape_count = 0;
};

struct MetricsReport {
  Metrics overall;
  std::vector<Metrics> per_step;
};

/// MAE, RMSE and MAPE over masked cells. MAPE skips |y| <= 1e-6 and throws NumericError
/// when nothing is left; an empty mask throws ContractError.
Metrics compute_metrics(std::span<const double> predicted, std::span<const double> truth,
                        std::span<const std::uint8_t> mask);

/// De-normalized predictions laid out [window][q][node][feature] with matching truth and mask.
struct Predictions {
  std::size_t output_steps = 0;
  std::size_t nodes = 0;
  std::size_t features = 0;
  std::vector<std::size_t> window_starts;
  std::vector<double> predicted;
  std::vector<double> truth;
  std::vector<std::uint8_t> mask;

  std::size_t cell(std::size_t w, std::size_t q, std::size_t n, std::size_t f) const {
    return ((w * output_steps + q) * nodes + n) * features + f;
  }
};

MetricsReport compute_report(const Predictions& predictions);

/// Truth and mask of the given split's windows, taken from `truth_table` (same grid as data).
Predictions empty_predictions(const PreparedData& data, Split split, std::size_t output_features,
                              const SeriesTable& truth_table);

/// Historical average: training mean of each node at the same (weekday, slot), falling back
/// to the node's training mean when that weekly slot never occurs in training.
Predictions ha_baseline(const PreparedData& data, Split split, std::size_t output_features,
                        const SeriesTable* truth_table = nullptr);

/// Model predictions on a split in evaluation mode. Truth defaults to data.table.
Predictions predict(const Model& model, const PreparedData& data, Split split,
                    const SeriesTable* truth_table = nullptr, std::size_t batch_size = 64);

/// Mean masked MAE in normalized space over a split (evaluation mode).
double evaluate_loss(const Model& model, const PreparedData& data, Split split, std::size_t batch_size = 64);

// ---------------------------------------------------------------------------------------------
// Training

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double epsilon = 0.0;
  double lr = 0.0;
  bool operator==(const HistoryRow&) const = default;
};

void write_history(const std::string& path, const std::vector<HistoryRow>& history);

/// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  std::size_t epoch = 0;          // completed epochs
  std::uint64_t iteration = 0;    // completed mini-batches
  double lr = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0;
  bool stopped = false;
  AdamState adam;
  std::string rng_state;
  std::vector<double> current;  // live parameter values
  std::vector<double> best;     // parameter values at the best validation loss
  std::vector<HistoryRow> history;
};

struct TrainOptions {
  /// Called after every epoch with the row just recorded.
  std::function<void(const HistoryRow&)> on_epoch;
};

/// Fresh state for a model: current = best = the initial parameters.
TrainState initial_state(const Model& model, const ModelConfig& config);

/// Runs epochs until max_epochs or the stall limit. On return the model holds the best
/// parameters. Non-finite losses throw NumericError with epoch, batch and parameter norms.
void train(Model& model, const PreparedData& data, TrainState& state, const TrainOptions& options = {});

}  // namespace msgc
