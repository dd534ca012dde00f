#include "msgc/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "msgc/error.hpp"
#include "msgc/rng.hpp"

namespace msgc {

namespace {

std::size_t sample_weighted(const std::vector<double>& weights, double total, Rng& rng) {
  double target = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    target -= weights[i];
    if (target < 0.0) return i;
  }
  return weights.size() - 1;
}

/// Interleaves per-node walk lists round by round, in a seeded node order per round.
std::vector<Walk> interleave(std::vector<std::vector<Walk>> per_node, std::size_t rounds, std::uint64_t seed) {
  Rng order_rng(seed);
  std::vector<std::size_t> order(per_node.size());
  std::vector<Walk> out;
  out.reserve(per_node.size() * rounds);
  for (std::size_t r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t v : order) out.push_back(std::move(per_node[v][r]));
  }
  return out;
}

double sigmoid(double x) {
  if (x > 30.0) return 1.0;
  if (x < -30.0) return 0.0;
  return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

WeightedGraph WeightedGraph::from_dense(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw DimensionError("WeightedGraph: adjacency must be square");
  WeightedGraph g(adjacency.rows());
  for (std::size_t i = 0; i < adjacency.rows(); ++i)
    for (std::size_t j = 0; j < adjacency.cols(); ++j)
      if (i != j && adjacency(i, j) > 0.0) g.neighbors_[i].emplace_back(j, adjacency(i, j));
  return g;
}

void WeightedGraph::set_edge(std::size_t a, std::size_t b, double weight) {
  if (a >= size() || b >= size()) throw IndexError("WeightedGraph: edge endpoint out of range");
  auto& list = neighbors_[a];
  auto it = std::lower_bound(list.begin(), list.end(), b, [](const auto& e, std::size_t v) { return e.first < v; });
  if (it != list.end() && it->first == b) {
    it->second = weight;
  } else {
    list.insert(it, {b, weight});
  }
}

void WeightedGraph::add_undirected_edge(std::size_t a, std::size_t b, double weight) {
  set_edge(a, b, weight);
  set_edge(b, a, weight);
}

bool WeightedGraph::has_edge(std::size_t a, std::size_t b) const {
  const auto& list = neighbors_[a];
  auto it = std::lower_bound(list.begin(), list.end(), b, [](const auto& e, std::size_t v) { return e.first < v; });
  return it != list.end() && it->first == b;
}

double WeightedGraph::row_sum(std::size_t v) const {
  double s = 0.0;
  for (const auto& [_, w] : neighbors_[v]) s += w;
  return s;
}

std::size_t WeightedGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& list : neighbors_) n += list.size();
  return n;
}

std::vector<Walk> random_walks(const WeightedGraph& graph, const WalkOptions& options) {
  if (options.walk_length < 2) throw ContractError("random_walks: walk_length must be >= 2");
  if (!(options.p > 0.0) || !(options.q > 0.0)) throw ContractError("random_walks: p and q must be positive");
  const std::size_t n = graph.size();
  std::vector<std::vector<Walk>> per_node(n);
  std::vector<double> weights;
  for (std::size_t start = 0; start < n; ++start) {
    Rng rng = Rng::derived(options.seed, start);
    for (std::size_t r = 0; r < options.walks_per_node; ++r) {
      Walk walk{start};
      walk.reserve(options.walk_length);
      while (walk.size() < options.walk_length) {
        const std::size_t cur = walk.back();
        const auto& nbrs = graph.neighbors(cur);
        if (nbrs.empty()) break;
        weights.resize(nbrs.size());
        double total = 0.0;
        for (std::size_t i = 0; i < nbrs.size(); ++i) {
          double w = nbrs[i].second;
          if (walk.size() >= 2) {
            const std::size_t prev = walk[walk.size() - 2];
            const std::size_t x = nbrs[i].first;
            if (x == prev) {
              w /= options.p;
            } else if (!graph.has_edge(prev, x)) {
              w /= options.q;
            }
          }
          weights[i] = w;
          total += w;
        }
        walk.push_back(nbrs[sample_weighted(weights, total, rng)].first);
      }
      per_node[start].push_back(std::move(walk));
    }
  }
  return interleave(std::move(per_node), options.walks_per_node, options.seed);
}

std::vector<Walk> uniform_walks(const WeightedGraph& graph, std::size_t walks_per_node, std::size_t walk_length,
                                std::uint64_t seed) {
  if (walk_length < 2) throw ContractError("uniform_walks: walk_length must be >= 2");
  const std::size_t n = graph.size();
  std::vector<std::vector<Walk>> per_node(n);
  std::vector<double> weights;
  for (std::size_t start = 0; start < n; ++start) {
    Rng rng = Rng::derived(seed, start);
    for (std::size_t r = 0; r < walks_per_node; ++r) {
      Walk walk{start};
      while (walk.size() < walk_length) {
        const auto& nbrs = graph.neighbors(walk.back());
        if (nbrs.empty()) break;
        weights.resize(nbrs.size());
        double total = 0.0;
        for (std::size_t i = 0; i < nbrs.size(); ++i) total += (weights[i] = nbrs[i].second);
        walk.push_back(nbrs[sample_weighted(weights, total, rng)].first);
      }
      per_node[start].push_back(std::move(walk));
    }
  }
  return interleave(std::move(per_node), walks_per_node, seed);
}

Matrix skipgram_train(const std::vector<Walk>& walks, std::size_t vocab, const SkipGramOptions& options) {
  if (options.dims < 1) throw ContractError("skipgram_train: dims must be >= 1");
  std::size_t tokens = 0;
  std::vector<double> counts(vocab, 0.0);
  for (const Walk& w : walks) {
    for (std::size_t v : w) {
      if (v >= vocab) throw IndexError("skipgram_train: token " + std::to_string(v) + " outside vocabulary");
      counts[v] += 1.0;
    }
    tokens += w.size();
  }
  if (tokens == 0) throw DataError("skipgram_train: empty walk corpus");

  const std::size_t dims = options.dims;
  Rng rng(options.seed);
  Matrix input(vocab, dims);
  for (double& x : input.values()) x = (rng.uniform() - 0.5) / static_cast<double>(dims);
  Matrix output(vocab, dims, 0.0);
  if (options.epochs == 0) return input;

  std::vector<double> cumulative(vocab);
  double acc = 0.0;
  for (std::size_t v = 0; v < vocab; ++v) cumulative[v] = (acc += std::pow(counts[v], 0.75));
  auto draw_negative = [&] {
    const double target = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(), vocab - 1));
  };

  const double total_steps = static_cast<double>(tokens * options.epochs);
  double processed = 0.0;
  std::vector<double> delta(dims);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (const Walk& walk : walks) {
      for (std::size_t i = 0; i < walk.size(); ++i, processed += 1.0) {
        const double lr = options.lr * std::max(1e-4, 1.0 - processed / total_steps);
        const std::size_t reach = options.window == 0 ? 0 : rng.index(options.window) + 1;
        const std::size_t lo = i >= reach ? i - reach : 0;
        const std::size_t hi = std::min(walk.size() - 1, i + reach);
        auto center = input.row(walk[i]);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == i) continue;
          std::fill(delta.begin(), delta.end(), 0.0);
          for (std::size_t s = 0; s <= options.negatives; ++s) {
            std::size_t target;
            double label;
            if (s == 0) {
              target = walk[c];
              label = 1.0;
            } else {
              target = draw_negative();
              if (target == walk[c]) continue;
              label = 0.0;
            }
            auto out = output.row(target);
            double dot = 0.0;
            for (std::size_t d = 0; d < dims; ++d) dot += center[d] * out[d];
            const double g = (label - sigmoid(dot)) * lr;
            for (std::size_t d = 0; d < dims; ++d) {
              delta[d] += g * out[d];
              out[d] += g * center[d];
            }
          }
          for (std::size_t d = 0; d < dims; ++d) center[d] += delta[d];
        }
      }
    }
  }
  return input;
}

WeightedGraph build_week_line_graph(std::size_t slots_per_day, bool wrap) {
  if (slots_per_day < 1) throw ContractError("build_week_line_graph: T must be >= 1");
  const std::size_t n = 7 * slots_per_day;
  WeightedGraph g(n);
  for (std::size_t k = 0; k + 1 < n; ++k) g.add_undirected_edge(k, k + 1, 1.0);
  if (wrap && n > 2) g.add_undirected_edge(n - 1, 0, 1.0);
  return g;
}

std::size_t temporal_index(std::size_t day, std::size_t slot, std::size_t slots_per_day) {
  if (day > 6 || slot >= slots_per_day) {
    throw IndexError("temporal_index: (day " + std::to_string(day) + ", slot " + std::to_string(slot) +
                     ") out of range for T=" + std::to_string(slots_per_day));
  }
  return day * slots_per_day + slot;
}

Matrix spatial_embedding(const Matrix& adjacency, std::size_t dims, const EmbeddingOptions& options,
                         std::uint64_t seed) {
  const auto graph = WeightedGraph::from_dense(adjacency);
  WalkOptions walk{options.walks_per_node, options.walk_length, options.p, options.q, seed};
  const auto walks = random_walks(graph, walk);
  return skipgram_train(walks, graph.size(),
                        {dims, options.window, options.negatives, options.epochs, options.lr, seed + 1});
}

Matrix temporal_embedding(std::size_t slots_per_day, std::size_t dims, const EmbeddingOptions& options,
                          std::uint64_t seed) {
  const auto graph = build_week_line_graph(slots_per_day, options.wrap_week);
  const auto walks = uniform_walks(graph, options.walks_per_node, options.walk_length, seed);
  return skipgram_train(walks, graph.size(),
                        {dims, options.window, options.negatives, options.epochs, options.lr, seed + 1});
}

}  // namespace msgc
