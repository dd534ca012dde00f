#include "msgc/correlations.hpp"

#include <algorithm>
#include <cmath>

#include "msgc/data.hpp"
#include "msgc/error.hpp"

namespace msgc {

Matrix adjacent_trend_scores(std::span<const double> history, std::size_t slots, std::size_t nodes,
                             std::size_t features, const Matrix& adjacency) {
  if (slots == 0) throw ContractError("adjacent_trend_scores: empty history");
  if (history.size() != slots * nodes * features) {
    throw DimensionError("adjacent_trend_scores: history has " + std::to_string(history.size()) + " values, expected " +
                         std::to_string(slots * nodes * features));
  }
  if (adjacency.rows() != nodes || adjacency.cols() != nodes) {
    throw DimensionError("adjacent_trend_scores: adjacency does not match node count");
  }
  auto at = [&](std::size_t t, std::size_t n, std::size_t f) { return history[(t * nodes + n) * features + f]; };
  std::vector<double> means(nodes * features, 0.0);
  for (std::size_t t = 0; t < slots; ++t)
    for (std::size_t n = 0; n < nodes; ++n)
      for (std::size_t f = 0; f < features; ++f) means[n * features + f] += at(t, n, f);
  for (double& m : means) m /= static_cast<double>(slots);

  // Sign pattern per cell: true when at or above the node's own mean.
  std::vector<std::uint8_t> above(history.size());
  for (std::size_t t = 0; t < slots; ++t)
    for (std::size_t n = 0; n < nodes; ++n)
      for (std::size_t f = 0; f < features; ++f)
        above[(t * nodes + n) * features + f] = at(t, n, f) >= means[n * features + f] ? 1 : 0;

  Matrix scores(nodes, nodes);
  const double denom = static_cast<double>(features * slots);
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t j = 0; j < nodes; ++j) {
      if (i == j || adjacency(i, j) == 0.0) continue;
      std::size_t agree = 0;
      for (std::size_t t = 0; t < slots; ++t)
        for (std::size_t f = 0; f < features; ++f)
          agree += above[(t * nodes + i) * features + f] == above[(t * nodes + j) * features + f] ? 1 : 0;
      scores(i, j) = static_cast<double>(agree) / denom;
    }
  return scores;
}

Matrix adjacent_trend_scores(const SeriesTable& table, std::size_t end_step, const Matrix& adjacency) {
  if (end_step > table.steps()) throw IndexError("adjacent_trend_scores: end step beyond table");
  const std::size_t stride = table.nodes() * table.features();
  return adjacent_trend_scores(std::span<const double>(table.values().data(), end_step * stride), end_step,
                               table.nodes(), table.features(), adjacency);
}

double reachability_score(std::size_t p, std::size_t q, double delta, double travel_minutes, std::size_t P,
                          bool same_node) {
  if (same_node) return 1.0;
  if (p < 1 || p > P || q < 1) throw IndexError("reachability_score: step index out of range");
  if (!(delta > 0.0)) throw ContractError("reachability_score: delta must be positive");
  if (std::isinf(travel_minutes)) return 0.0;
  const double arrive_begin = static_cast<double>(p - 1) * delta + travel_minutes;
  const double arrive_end = static_cast<double>(p) * delta + travel_minutes;
  const double predict_begin = static_cast<double>(P + q - 1) * delta;
  const double predict_end = static_cast<double>(P + q) * delta;
  const double overlap = std::min(arrive_end, predict_end) - std::max(arrive_begin, predict_begin);
  return std::clamp(overlap / delta, 0.0, 1.0);
}

ReachabilityStack build_reachability_stack(const Matrix& travel_time, double delta, std::size_t P, std::size_t Q) {
  if (travel_time.rows() != travel_time.cols()) throw DimensionError("reachability: travel time must be square");
  const std::size_t n = travel_time.rows();
  ReachabilityStack stack{P, Q, delta, {}};
  stack.matrices.reserve(P * Q);
  for (std::size_t q = 1; q <= Q; ++q)
    for (std::size_t p = 1; p <= P; ++p) {
      Matrix m(n, n);
      for (std::size_t target = 0; target < n; ++target)
        for (std::size_t source = 0; source < n; ++source)
          m(target, source) = reachability_score(p, q, delta, travel_time(source, target), P, source == target);
      stack.matrices.push_back(std::move(m));
    }
  return stack;
}

Tensor to_tensor(const Matrix& m) { return Tensor({m.rows(), m.cols()}, m.values()); }

Matrix to_matrix(const Tensor& t) {
  if (t.rank() != 2) throw DimensionError("to_matrix: expected rank-2 tensor, got " + shape_str(t.shape()));
  return Matrix(t.dim(0), t.dim(1), std::vector<double>(t.data().begin(), t.data().end()));
}

Tensor gcn_layer(const Tensor& S, const Tensor& X, const Tensor& W, bool activate) {
  const std::size_t n = S.shape()[S.rank() - 1];
  if (S.rank() < 2 || S.shape()[S.rank() - 2] != n || X.rank() < 2 || X.shape()[X.rank() - 2] != n) {
    throw DimensionError("gcn_layer: spatial matrix " + shape_str(S.shape()) + " does not match features " +
                         shape_str(X.shape()));
  }
  // Same product either way; multiply on the narrower side first.
  const std::size_t in = W.dim(1), out_width = W.dim(0);
  Tensor out = out_width <= in ? matmul(S, matmul_nt(X, W)) : matmul_nt(matmul(S, X), W);
  return activate ? relu(out) : out;
}

GraphConv::GraphConv(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                     std::size_t layers, Rng& rng)
    : out_(out) {
  if (layers == 0) throw ContractError("GraphConv: at least one layer");
  for (std::size_t l = 0; l < layers; ++l) {
    weights_.push_back(params.add_weight(prefix + ".w" + std::to_string(l), out, l == 0 ? in : out, rng));
  }
}

Tensor GraphConv::forward(const Tensor& S, const Tensor& X) const {
  Tensor h = X;
  for (const Tensor& w : weights_) h = gcn_layer(S, h, w, true);
  return h;
}

Tensor GraphConv::project(const Tensor& X) const { return matmul_nt(X, weights_.front()); }

Tensor GraphConv::forward_projected(const Tensor& S, const Tensor& XW) const {
  Tensor h = relu(matmul(S, XW));
  for (std::size_t l = 1; l < weights_.size(); ++l) h = gcn_layer(S, h, weights_[l], true);
  return h;
}

SemanticProjector::SemanticProjector(ParameterSet& params, const std::string& prefix, std::size_t in,
                                     std::size_t key_dim, Rng& rng) {
  k1_ = params.add_weight(prefix + ".wk1", key_dim, in, rng);
  k2_ = params.add_weight(prefix + ".wk2", key_dim, key_dim, rng);
  q1_ = params.add_weight(prefix + ".wq1", key_dim, in, rng);
  q2_ = params.add_weight(prefix + ".wq2", key_dim, key_dim, rng);
}

Tensor SemanticProjector::keys(const Tensor& xst) const { return matmul_nt(relu(matmul_nt(xst, k1_)), k2_); }

Tensor SemanticProjector::queries(const Tensor& xst) const { return matmul_nt(relu(matmul_nt(xst, q1_)), q2_); }

Tensor SemanticProjector::attention(const Tensor& xst) const { return semantic_attention(keys(xst), queries(xst)); }

Tensor semantic_attention(const Tensor& keys, const Tensor& queries) {
  return softmax_rows(matmul_nt(keys, queries));
}

}  // namespace msgc
