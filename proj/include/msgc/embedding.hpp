#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "msgc/matrix.hpp"

namespace msgc {

/// Adjacency lists with positive edge weights, neighbours sorted by index.
class WeightedGraph {
 public:
  explicit WeightedGraph(std::size_t n = 0) : neighbors_(n) {}
  static WeightedGraph from_dense(const Matrix& adjacency);

  /// Adds (or overwrites) the directed edge a -> b.
  void set_edge(std::size_t a, std::size_t b, double weight);
  void add_undirected_edge(std::size_t a, std::size_t b, double weight);

  std::size_t size() const { return neighbors_.size(); }
  const std::vector<std::pair<std::size_t, double>>& neighbors(std::size_t v) const { return neighbors_[v]; }
  bool has_edge(std::size_t a, std::size_t b) const;
  std::size_t degree(std::size_t v) const { return neighbors_[v].size(); }
  double row_sum(std::size_t v) const;
  /// Directed entries; an undirected edge counts twice.
  std::size_t edge_count() const;

 private:
  std::vector<std::vector<std::pair<std::size_t, double>>> neighbors_;
};

using Walk = std::vector<std::size_t>;

struct WalkOptions {
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 80;
  double p = 1.0;  // return parameter
  double q = 1.0;  // in-out parameter
  std::uint64_t seed = 0;
};

/// node2vec second-order biased walks. From (prev t, current v) the unnormalised weight of
/// candidate x is w(v,x) * (1/p if x == t, 1 if x neighbours t, else 1/q). Walks stop at
/// nodes without out-edges; an isolated start yields a walk of length 1. Each start node
/// draws from its own seeded stream.
std::vector<Walk> random_walks(const WeightedGraph& graph, const WalkOptions& options);

/// DeepWalk first-order walks (next node proportional to edge weight).
std::vector<Walk> uniform_walks(const WeightedGraph& graph, std::size_t walks_per_node, std::size_t walk_length,
                                std::uint64_t seed);

struct SkipGramOptions {
  std::size_t dims = 64;
  std::size_t window = 10;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr = 0.025;  // decays linearly to lr * 1e-4
  std::uint64_t seed = 0;
};

/// Skip-gram with negative sampling over a walk corpus; returns the input-side vectors
/// (vocab x dims). Negatives are drawn from the unigram distribution raised to 0.75.
Matrix skipgram_train(const std::vector<Walk>& walks, std::size_t vocab, const SkipGramOptions& options);

/// Weekly slot graph: 7*T slots connected as a path, optionally closed into a cycle.
WeightedGraph build_week_line_graph(std::size_t slots_per_day, bool wrap = false);

/// Row of the temporal embedding for slot `slot` of weekday `day` (0 = Monday).
std::size_t temporal_index(std::size_t day, std::size_t slot, std::size_t slots_per_day);

struct EmbeddingOptions {
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 80;
  std::size_t window = 10;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr = 0.025;
  double p = 1.0;
  double q = 1.0;
  bool wrap_week = false;

  bool operator==(const EmbeddingOptions&) const = default;
};

/// SP: node2vec over the traffic adjacency, N x dims.
Matrix spatial_embedding(const Matrix& adjacency, std::size_t dims, const EmbeddingOptions& options,
                         std::uint64_t seed);
/// TP: DeepWalk over the weekly line graph, 7T x dims.
Matrix temporal_embedding(std::size_t slots_per_day, std::size_t dims, const EmbeddingOptions& options,
                          std::uint64_t seed);

}  // namespace msgc
