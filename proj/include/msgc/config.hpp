#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msgc/embedding.hpp"

namespace msgc {

/// Every hyperparameter and ablation switch of a run. Together with the input files it
/// fully determines the result. Defaults follow the best reported setting where one exists.
struct ModelConfig {
  // Problem shape.
  std::size_t input_steps = 3;   // P
  std::size_t output_steps = 3;  // Q
  std::size_t input_features = 1;
  std::size_t output_features = 1;

  // Widths.
  std::size_t fusion_dim = 256;        // per-branch width of the fused features
  std::size_t spatial_emb_dim = 64;    // node embedding width
  std::size_t temporal_emb_dim = 64;   // weekly slot embedding width
  std::size_t key_dim = 0;             // semantic key/query width; 0 = fusion_dim
  std::size_t semantic_dim = 64;
  std::size_t adjacent_dim = 64;
  std::size_t reach_dim = 64;
  std::size_t encoder_dim = 64;
  std::size_t decoder_dim = 64;
  std::size_t attention_dim = 0;       // 0 = encoder_dim
  std::size_t heads = 5;
  std::size_t gcn_layers = 2;
  std::size_t rnn_layers = 2;

  // Ablation switches.
  bool use_temporal_emb = true;
  bool use_spatial_emb = true;
  bool use_adjacent = true;
  bool use_semantic = true;
  bool use_reachability = true;
  bool use_temporal_attention = true;
  bool linear_head = false;              // drop the relu on the output head
  bool normalize_attention_matrices = false;  // apply I - D^-1/2 S D^-1/2 to A^f and A^r too

  // Graph construction.
  double adjacency_threshold = 0.1;
  double mean_speed_kmh = 0.0;  // 0: derive from the training split's mean of feature 0

  // Embeddings.
  EmbeddingOptions embedding;

  // Data handling.
  std::size_t stride = 1;
  double train_fraction = 0.7;
  double val_fraction = 0.8;  // cumulative boundary between validation and test
  bool subsample_prefix = true;

  // Optimisation.
  std::uint64_t seed = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 1000;
  std::size_t patience = 10;  // epochs without validation gain before the lr halves
  std::size_t stall = 50;     // epochs without validation gain before stopping
  double sampling_tau = 2000.0;

  std::size_t effective_key_dim() const { return key_dim == 0 ? fusion_dim : key_dim; }
  std::size_t effective_attention_dim() const { return attention_dim == 0 ? encoder_dim : attention_dim; }

  /// Every violated constraint, one message each; empty when valid.
  std::vector<std::string> validate() const;
  /// Throws UsageError listing all violations.
  void require_valid() const;

  /// Disables the named branch. Accepts semantic, adjacent, reachability,
  /// temporal_attention, temporal_embedding, spatial_embedding.
  void ablate(const std::string& branch);

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Unknown keys are rejected with UsageError; missing keys keep their defaults.
void from_json(const nlohmann::json& j, ModelConfig& c);

ModelConfig load_config(const std::string& path);
void save_config(const std::string& path, const ModelConfig& config);

/// Applies `key=value` overrides (JSON-typed values; bare strings allowed).
void apply_overrides(ModelConfig& config, const std::vector<std::string>& overrides);

}  // namespace msgc
