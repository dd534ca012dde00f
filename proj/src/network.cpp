#include "msgc/network.hpp"

#include <utility>

#include "msgc/error.hpp"

namespace msgc {

namespace {

Tensor zeros(std::size_t b, std::size_t n, std::size_t f) { return Tensor(Shape{b, n, f}, 0.0); }

// Rethrows library errors with the forward-pass location prefixed, keeping the error type.
template <typename Fn>
auto with_context(const std::string& where, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError(where + ": " + e.what());
  } catch (const DimensionError& e) {
    throw DimensionError(where + ": " + e.what());
  }
}

// Replicates rows of a frozen table into a [B, N, F] constant.
Tensor gather_rows(const Matrix& table, const std::vector<std::size_t>& rows_per_sample, std::size_t nodes) {
  const std::size_t b = rows_per_sample.size(), f = table.cols();
  std::vector<double> out(b * nodes * f);
  for (std::size_t s = 0; s < b; ++s) {
    if (rows_per_sample[s] >= table.rows()) throw IndexError("temporal row out of range");
    const auto row = table.row(rows_per_sample[s]);
    for (std::size_t n = 0; n < nodes; ++n) std::copy(row.begin(), row.end(), out.begin() + (s * nodes + n) * f);
  }
  return Tensor({b, nodes, f}, std::move(out));
}

Tensor tile_batch(const Matrix& m, std::size_t b) {
  std::vector<double> out;
  out.reserve(b * m.values().size());
  for (std::size_t s = 0; s < b; ++s) out.insert(out.end(), m.values().begin(), m.values().end());
  return Tensor({b, m.rows(), m.cols()}, std::move(out));
}

Tensor identity_minus(const Tensor& a) {
  // I - A for a batch of square matrices; rows of A sum to one, so this equals the
  // symmetric normalization I - D^-1/2 A D^-1/2 with D = I.
  const std::size_t b = a.dim(0), n = a.dim(1);
  std::vector<double> eye(b * n * n, 0.0);
  for (std::size_t s = 0; s < b; ++s)
    for (std::size_t i = 0; i < n; ++i) eye[(s * n + i) * n + i] = 1.0;
  return sub(Tensor({b, n, n}, std::move(eye)), a);
}

}  // namespace

bool FixedInputs::operator==(const FixedInputs& other) const {
  if (!(spatial_embedding == other.spatial_embedding && temporal_embedding == other.temporal_embedding &&
        adjacent_matrix == other.adjacent_matrix && slots_per_day == other.slots_per_day)) {
    return false;
  }
  const auto& a = reachability;
  const auto& b = other.reachability;
  return a.input_steps == b.input_steps && a.output_steps == b.output_steps && a.delta == b.delta &&
         a.matrices == b.matrices;
}

GruCell::GruCell(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng)
    : hidden_(hidden) {
  wg_ = params.add_weight(prefix + ".wg", 2 * hidden, in + hidden, rng);
  bg_ = params.add_zeros(prefix + ".bg", {2 * hidden});
  wc_ = params.add_weight(prefix + ".wc", hidden, in + hidden, rng);
  bc_ = params.add_zeros(prefix + ".bc", {hidden});
}

Tensor GruCell::step(const Tensor& x, const Tensor& h) const {
  const std::size_t axis = x.rank() - 1;
  Tensor gates = sigmoid(add_bias(matmul_nt(concat({x, h}, axis), wg_), bg_));
  Tensor z = slice(gates, axis, 0, hidden_);
  Tensor r = slice(gates, axis, hidden_, 2 * hidden_);
  Tensor c = tanh(add_bias(matmul_nt(concat({x, mul(r, h)}, axis), wc_), bc_));
  return add(h, mul(z, sub(c, h)));
}

TemporalAttention::TemporalAttention(ParameterSet& params, const std::string& prefix, std::size_t encoder_dim,
                                     std::size_t decoder_dim, std::size_t attention_dim, std::size_t heads,
                                     Rng& rng) {
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string name = prefix + ".h" + std::to_string(h);
    w_.push_back(params.add_weight(name + ".w", attention_dim, encoder_dim + decoder_dim, rng));
    v_.push_back(params.add_weight(name + ".v", 1, attention_dim, rng));
  }
  combine_ = params.add_weight(prefix + ".wc", encoder_dim, heads * encoder_dim, rng);
}

Tensor TemporalAttention::context(const std::vector<Tensor>& encoder_states, const Tensor& s,
                                  std::vector<Tensor>* weights) const {
  const std::size_t axis = s.rank() - 1;
  std::vector<Tensor> per_head;
  per_head.reserve(w_.size());
  for (std::size_t h = 0; h < w_.size(); ++h) {
    std::vector<Tensor> scores;
    scores.reserve(encoder_states.size());
    for (const Tensor& hp : encoder_states) {
      scores.push_back(matmul_nt(tanh(matmul_nt(concat({hp, s}, axis), w_[h])), v_[h]));
    }
    Tensor alpha = softmax_rows(concat(scores, axis));
    if (weights) weights->push_back(alpha);
    Tensor ctx;
    for (std::size_t p = 0; p < encoder_states.size(); ++p) {
      Tensor term = scale_rows(encoder_states[p], slice(alpha, axis, p, p + 1));
      ctx = ctx.defined() ? add(ctx, term) : term;
    }
    per_head.push_back(ctx);
  }
  return matmul_nt(concat(per_head, axis), combine_);
}

Model::Model(const ModelConfig& config, FixedInputs fixed) : config_(config), fixed_(std::move(fixed)) {
  config_.require_valid();
  const auto& c = config_;
  const std::size_t n = fixed_.nodes();
  if (n == 0) throw ContractError("Model: no nodes");
  if (fixed_.spatial_embedding.cols() != c.spatial_emb_dim) {
    throw DimensionError("Model: spatial embedding width " + std::to_string(fixed_.spatial_embedding.cols()) +
                         " != spatial_emb_dim " + std::to_string(c.spatial_emb_dim));
  }
  if (fixed_.temporal_embedding.cols() != c.temporal_emb_dim ||
      fixed_.temporal_embedding.rows() != 7 * fixed_.slots_per_day) {
    throw DimensionError("Model: temporal embedding must be " + std::to_string(7 * fixed_.slots_per_day) + "x" +
                         std::to_string(c.temporal_emb_dim));
  }
  if (fixed_.adjacent_matrix.rows() != n || fixed_.adjacent_matrix.cols() != n) {
    throw DimensionError("Model: adjacent matrix does not match node count");
  }
  const auto& r = fixed_.reachability;
  if (r.input_steps != c.input_steps || r.output_steps != c.output_steps ||
      r.matrices.size() != c.input_steps * c.output_steps) {
    throw DimensionError("Model: reachability stack does not match P and Q");
  }
  for (const Matrix& m : r.matrices) {
    if (m.rows() != n || m.cols() != n) throw DimensionError("Model: reachability matrix does not match node count");
  }

  Rng rng(c.seed);
  const std::size_t fst = c.fusion_dim, xst = 3 * fst;
  wx_ = params_.add_weight("fuse.wx", fst, c.input_features, rng);
  wt_ = params_.add_weight("fuse.wt", fst, c.temporal_emb_dim, rng);
  wi_ = params_.add_weight("fuse.wi", fst, c.spatial_emb_dim, rng);
  semantic_proj_ = SemanticProjector(params_, "semantic.proj", xst, c.effective_key_dim(), rng);
  semantic_gcn_ = GraphConv(params_, "semantic.gcn", xst, c.semantic_dim, c.gcn_layers, rng);
  adjacent_gcn_ = GraphConv(params_, "adjacent.gcn", xst, c.adjacent_dim, c.gcn_layers, rng);
  w1_ = params_.add_weight("encoder.w1", c.encoder_dim, c.semantic_dim + c.adjacent_dim, rng);
  for (std::size_t l = 0; l < c.rnn_layers; ++l) {
    encoder_.emplace_back(params_, "encoder.l" + std::to_string(l), c.encoder_dim, c.encoder_dim, rng);
  }
  attention_ = TemporalAttention(params_, "attention", c.encoder_dim, c.decoder_dim, c.effective_attention_dim(),
                                 c.heads, rng);
  reach_gcn_ = GraphConv(params_, "reach.gcn", xst, c.reach_dim, c.gcn_layers, rng);
  w2_ = params_.add_weight("decoder.w2", c.decoder_dim,
                           c.encoder_dim + c.input_steps * c.reach_dim + c.output_features, rng);
  for (std::size_t l = 0; l < c.rnn_layers; ++l) {
    decoder_.emplace_back(params_, "decoder.l" + std::to_string(l), c.decoder_dim, c.decoder_dim, rng);
  }
  w3_ = params_.add_weight("head.w3", c.output_features, c.decoder_dim, rng);
  b3_ = params_.add_zeros("head.b3", {c.output_features});
}

Tensor Model::fuse(const Tensor& x, const Tensor& tp, const Tensor& sp) const {
  const std::size_t b = x.dim(0), n = x.dim(1), f = config_.fusion_dim;
  Tensor fx = relu(matmul_nt(x, wx_));
  Tensor ft = config_.use_temporal_emb ? relu(matmul_nt(tp, wt_)) : zeros(b, n, f);
  Tensor fs = config_.use_spatial_emb ? relu(matmul_nt(sp, wi_)) : zeros(b, n, f);
  return concat({fx, ft, fs}, 2);
}

Tensor Model::fused_features(const Batch& batch, std::size_t p) const {
  const auto& c = config_;
  if (p >= batch.inputs.size()) throw IndexError("fused_features: input step " + std::to_string(p) + " out of range");
  const std::size_t n = fixed_.nodes();
  Tensor sp = c.use_spatial_emb ? tile_batch(fixed_.spatial_embedding, batch.size) : Tensor();
  Tensor tp = c.use_temporal_emb ? gather_rows(fixed_.temporal_embedding, batch.temporal_rows[p], n) : Tensor();
  return fuse(batch.inputs[p], tp, sp);
}

ForwardResult Model::forward(const Batch& batch, const ForwardOptions& options) const {
  const auto& c = config_;
  const std::size_t P = c.input_steps, Q = c.output_steps, n = fixed_.nodes(), b = batch.size;
  if (batch.inputs.size() != P || batch.temporal_rows.size() != P) {
    throw DimensionError("forward: batch carries " + std::to_string(batch.inputs.size()) + " input steps, expected " +
                         std::to_string(P));
  }
  for (const Tensor& x : batch.inputs) {
    if (x.shape() != Shape{b, n, c.input_features}) {
      throw DimensionError("forward: input step shape " + shape_str(x.shape()) + ", expected " +
                           shape_str({b, n, c.input_features}));
    }
  }
  const bool teacher = options.training && !batch.targets.empty();
  if (teacher && (batch.targets.size() != Q || batch.masks.size() != Q)) {
    throw DimensionError("forward: batch carries wrong number of target steps");
  }

  ForwardResult result;
  Tensor sp = c.use_spatial_emb ? tile_batch(fixed_.spatial_embedding, b) : Tensor();

  // Per input step: fused features, semantic and adjacent branches, encoder recurrence.
  std::vector<Tensor> xst(P);
  std::vector<Tensor> encoder_top(P);
  std::vector<Tensor> enc_h(c.rnn_layers, zeros(b, n, c.encoder_dim));
  const Tensor adjacency = to_tensor(fixed_.adjacent_matrix);
  for (std::size_t p = 0; p < P; ++p) {
    with_context("input step " + std::to_string(p + 1), [&] {
      Tensor tp = c.use_temporal_emb ? gather_rows(fixed_.temporal_embedding, batch.temporal_rows[p], n) : Tensor();
      xst[p] = fuse(batch.inputs[p], tp, sp);

      Tensor xf = zeros(b, n, c.semantic_dim);
      if (c.use_semantic) {
        Tensor af = semantic_proj_.attention(xst[p]);
        if (options.collect_attention) result.semantic.push_back(af);
        xf = semantic_gcn_.forward(c.normalize_attention_matrices ? identity_minus(af) : af, xst[p]);
      }
      Tensor xa = c.use_adjacent ? adjacent_gcn_.forward(adjacency, xst[p]) : zeros(b, n, c.adjacent_dim);

      Tensor in = matmul_nt(concat({xf, xa}, 2), w1_);
      for (std::size_t l = 0; l < encoder_.size(); ++l) {
        enc_h[l] = encoder_[l].step(in, enc_h[l]);
        in = enc_h[l];
      }
      encoder_top[p] = in;
      return 0;
    });
  }

  // The reachability branch applies one GCN to every (q, p) pair; the first feature
  // transform depends only on p.
  std::vector<Tensor> reach_proj;
  if (c.use_reachability) {
    for (std::size_t p = 0; p < P; ++p) reach_proj.push_back(reach_gcn_.project(xst[p]));
  }

  // Decoder.
  std::vector<Tensor> dec_h(c.rnn_layers, zeros(b, n, c.decoder_dim));
  Tensor y_prev = slice(batch.inputs[P - 1], 2, 0, c.output_features);
  for (std::size_t q = 1; q <= Q; ++q) {
    with_context("output step " + std::to_string(q), [&] {
      Tensor ctx;
      if (c.use_temporal_attention) {
        std::vector<Tensor> weights;
        ctx = attention_.context(encoder_top, dec_h.back(), options.collect_attention ? &weights : nullptr);
        if (options.collect_attention) result.temporal_attention.push_back(std::move(weights));
      } else {
        ctx = encoder_top[P - 1];
      }

      Tensor xr;
      if (c.use_reachability) {
        std::vector<Tensor> parts;
        parts.reserve(P);
        for (std::size_t p = 1; p <= P; ++p) {
          parts.push_back(reach_gcn_.forward_projected(to_tensor(fixed_.reachability.at(q, p)), reach_proj[p - 1]));
        }
        xr = concat(parts, 2);
      } else {
        xr = zeros(b, n, P * c.reach_dim);
      }

      Tensor in = matmul_nt(concat({ctx, xr, y_prev}, 2), w2_);
      for (std::size_t l = 0; l < decoder_.size(); ++l) {
        dec_h[l] = decoder_[l].step(in, dec_h[l]);
        in = dec_h[l];
      }
      Tensor y = add_bias(matmul_nt(in, w3_), b3_);
      if (!c.linear_head) y = relu(y);
      result.predictions.push_back(y);

      y_prev = y;
      if (teacher && q < Q) {
        bool use_truth = options.epsilon >= 1.0;
        if (options.epsilon > 0.0 && options.epsilon < 1.0) {
          if (!options.rng) throw ContractError("forward: scheduled sampling needs an rng");
          use_truth = options.rng->bernoulli(options.epsilon);
        }
        if (use_truth) {
          // Observed cells take the ground truth; unobserved cells keep the prediction.
          const Tensor& m = batch.masks[q - 1];
          y_prev = add(mul(m, batch.targets[q - 1]), mul(add_scalar(scale(m, -1.0), 1.0), y));
        }
      }
      return 0;
    });
  }
  return result;
}

}  // namespace msgc
