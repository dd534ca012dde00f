#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "msgc/config.hpp"
#include "msgc/correlations.hpp"
#include "msgc/matrix.hpp"
#include "msgc/optim.hpp"
#include "msgc/rng.hpp"
#include "msgc/tensor.hpp"

namespace msgc {

/// Precomputed, frozen inputs of the model: embeddings and the static spatial matrices in
/// the form the graph convolutions consume them.
struct FixedInputs {
  Matrix spatial_embedding;   // [N, F_S]
  Matrix temporal_embedding;  // [7T, F_T]
  Matrix adjacent_matrix;     // normalized adjacent-trend matrix, [N, N]
  ReachabilityStack reachability;
  std::size_t slots_per_day = 0;

  std::size_t nodes() const { return spatial_embedding.rows(); }
  bool operator==(const FixedInputs& other) const;
};

/// One mini-batch in normalized space. Node-major layout [B, N, F] per step.
struct Batch {
  std::size_t size = 0;
  std::vector<Tensor> inputs;                          // P x [B, N, F_I]
  std::vector<std::vector<std::size_t>> temporal_rows;  // P x B rows of the temporal embedding
  std::vector<Tensor> targets;                         // Q x [B, N, F_O]; may be empty at inference
  std::vector<Tensor> masks;                           // Q x [B, N, F_O], 1 = observed
};

struct ForwardOptions {
  bool training = false;
  double epsilon = 0.0;  // probability of feeding the ground truth to the next decoder step
  Rng* rng = nullptr;    // required when training with 0 < epsilon < 1
  bool collect_attention = false;
};

struct ForwardResult {
  std::vector<Tensor> predictions;                     // Q x [B, N, F_O]
  std::vector<Tensor> semantic;                        // P x [B, N, N] when collected
  std::vector<std::vector<Tensor>> temporal_attention;  // Q x heads x [B, N, P] when collected
};

/// GRU cell applied per row with shared weights:
/// h' = (1 - z) * h + z * c, c = tanh(W_c [x, r * h] + b_c), z and r sigmoid gates on [x, h].
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng);

  Tensor step(const Tensor& x, const Tensor& h) const;
  std::size_t hidden() const { return hidden_; }

 private:
  Tensor wg_, bg_, wc_, bc_;
  std::size_t hidden_ = 0;
};

/// Multi-head additive attention over encoder states.
class TemporalAttention {
 public:
  TemporalAttention() = default;
  TemporalAttention(ParameterSet& params, const std::string& prefix, std::size_t encoder_dim,
                    std::size_t decoder_dim, std::size_t attention_dim, std::size_t heads, Rng& rng);

  /// Context [B, N, F_H] for decoder state `s` [B, N, F_dec] over encoder states P x [B, N, F_H].
  /// Per-head weights over p are appended to `weights` when non-null.
  Tensor context(const std::vector<Tensor>& encoder_states, const Tensor& s, std::vector<Tensor>* weights) const;

 private:
  std::vector<Tensor> w_, v_;
  Tensor combine_;
};

class Model {
 public:
  Model(const ModelConfig& config, FixedInputs fixed);

  const ModelConfig& config() const { return config_; }
  const FixedInputs& fixed() const { return fixed_; }
  FixedInputs& mutable_fixed() { return fixed_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  ForwardResult forward(const Batch& batch, const ForwardOptions& options = {}) const;
  /// Fused features of input step p (0-based), [B, N, 3 F_ST].
  Tensor fused_features(const Batch& batch, std::size_t p) const;

 private:
  Tensor fuse(const Tensor& x, const Tensor& tp, const Tensor& sp) const;

  ModelConfig config_;
  FixedInputs fixed_;
  ParameterSet params_;

  Tensor wx_, wt_, wi_;
  SemanticProjector semantic_proj_;
  GraphConv semantic_gcn_, adjacent_gcn_, reach_gcn_;
  Tensor w1_, w2_, w3_, b3_;
  std::vector<GruCell> encoder_, decoder_;
  TemporalAttention attention_;
};

}  // namespace msgc
