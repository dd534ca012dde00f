#pragma once

#include <span>
#include <string>
#include <vector>

#include "msgc/matrix.hpp"
#include "msgc/optim.hpp"
#include "msgc/tensor.hpp"

namespace msgc {

class SeriesTable;

// ---------------------------------------------------------------------------------------------
// Adjacent trend correlation

/// Co-movement score of adjacent nodes over a raw history laid out [t][node][feature].
/// For each adjacent pair, counts the slots where both series sit at-or-above their own
/// mean, plus the slots where both sit below it, summed over features and divided by
/// features * slots. Non-adjacent pairs and the diagonal score 0.
Matrix adjacent_trend_scores(std::span<const double> history, std::size_t slots, std::size_t nodes,
                             std::size_t features, const Matrix& adjacency);

/// Same, over steps [0, end_step) of a table (the training split).
Matrix adjacent_trend_scores(const SeriesTable& table, std::size_t end_step, const Matrix& adjacency);

// ---------------------------------------------------------------------------------------------
// Reachability correlation

/// Influence of a context node at input step p (1-based) on a target node at output step q
/// (1-based). Departures during [(p-1)d, pd] arrive during [(p-1)d + M, pd + M]; output step q
/// covers [(P+q-1)d, (P+q)d]. The score is the overlap length divided by d, in [0,1].
/// Unreachable pairs (M = +inf) score 0; a node always scores 1 on itself.
double reachability_score(std::size_t p, std::size_t q, double delta, double travel_minutes, std::size_t P,
                          bool same_node = false);

/// All Q x P reachability matrices; entry (j, i) of matrix (q,p) is the influence of node i
/// on node j, so row j aggregates the sources of target j.
struct ReachabilityStack {
  std::size_t input_steps = 0;   // P
  std::size_t output_steps = 0;  // Q
  double delta = 0.0;
  std::vector<Matrix> matrices;  // index (q-1) * P + (p-1)

  const Matrix& at(std::size_t q, std::size_t p) const { return matrices.at((q - 1) * input_steps + (p - 1)); }
  Matrix& at(std::size_t q, std::size_t p) { return matrices.at((q - 1) * input_steps + (p - 1)); }
};

/// travel_time(i, j): minutes from node i to node j.
ReachabilityStack build_reachability_stack(const Matrix& travel_time, double delta, std::size_t P, std::size_t Q);

// ---------------------------------------------------------------------------------------------
// Graph convolution

Tensor to_tensor(const Matrix& m);
Matrix to_matrix(const Tensor& t);

/// One graph-convolution layer: relu(S * X * W^T), or without the activation when
/// `activate` is false. S is [N,N] (shared) or [B,N,N]; X is [N,F] or [B,N,F]; W is [out,F].
Tensor gcn_layer(const Tensor& S, const Tensor& X, const Tensor& W, bool activate = true);

/// Stack of graph-convolution layers sharing one spatial matrix.
class GraphConv {
 public:
  GraphConv() = default;
  GraphConv(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out, std::size_t layers,
            Rng& rng);

  Tensor forward(const Tensor& S, const Tensor& X) const;
  /// X W_0^T, the first layer's feature transform, reusable across spatial matrices.
  Tensor project(const Tensor& X) const;
  /// forward() given project(X); equals forward(S, X) up to rounding.
  Tensor forward_projected(const Tensor& S, const Tensor& XW) const;
  std::size_t out_width() const { return out_; }

 private:
  std::vector<Tensor> weights_;
  std::size_t out_ = 0;
};

/// Key/query projections K = W_k2 relu(W_k1 x), Q = W_q2 relu(W_q1 x) shared by all nodes.
class SemanticProjector {
 public:
  SemanticProjector() = default;
  SemanticProjector(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t key_dim, Rng& rng);

  Tensor keys(const Tensor& xst) const;
  Tensor queries(const Tensor& xst) const;
  /// Row-softmaxed K Q^T per sample: [B,N,N] from fused features [B,N,in].
  Tensor attention(const Tensor& xst) const;

 private:
  Tensor k1_, k2_, q1_, q2_;
};

/// Row-softmax of the key/query score table; entry (i,j) = softmax_j(K_i . Q_j).
Tensor semantic_attention(const Tensor& keys, const Tensor& queries);

}  // namespace msgc
