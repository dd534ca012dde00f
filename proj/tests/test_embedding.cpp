#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "msgc/embedding.hpp"
#include "msgc/error.hpp"
#include "msgc/rng.hpp"

using namespace msgc;

namespace {

// Pearson chi-square of observed counts against a uniform expectation.
double chi_square_uniform(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  const double expected = total / static_cast<double>(counts.size());
  double chi = 0.0;
  for (double c : counts) chi += (c - expected) * (c - expected) / expected;
  return chi;
}

// Counts the successors of `from` across every transition in a corpus.
std::vector<double> successor_counts(const std::vector<Walk>& walks, std::size_t from, std::size_t vocab) {
  std::vector<double> counts(vocab, 0.0);
  for (const Walk& w : walks)
    for (std::size_t k = 0; k + 1 < w.size(); ++k)
      if (w[k] == from) counts[w[k + 1]] += 1.0;
  return counts;
}

double cosine(const Matrix& m, std::size_t a, std::size_t b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < m.cols(); ++k) {
    dot += m(a, k) * m(b, k);
    na += m(a, k) * m(a, k);
    nb += m(b, k) * m(b, k);
  }
  return dot / std::sqrt(na * nb);
}

WeightedGraph path_graph(std::size_t n) {
  WeightedGraph g(n);
  for (std::size_t k = 0; k + 1 < n; ++k) g.add_undirected_edge(k, k + 1, 1.0);
  return g;
}

}  // namespace

TEST(RandomWalks, ComponentsNeverMix) {
  WeightedGraph g(6);
  g.add_undirected_edge(0, 1, 1.0);
  g.add_undirected_edge(1, 2, 2.0);
  g.add_undirected_edge(3, 4, 1.0);
  g.add_undirected_edge(4, 5, 0.5);
  const auto walks = random_walks(g, {20, 15, 0.5, 2.0, 3});
  EXPECT_EQ(walks.size(), 120u);
  for (const Walk& w : walks) {
    const bool low = w.front() < 3;
    for (std::size_t v : w) EXPECT_EQ(v < 3, low);
  }
}

TEST(RandomWalks, LengthTwoIsStartPlusNeighbour) {
  WeightedGraph g(4);
  g.add_undirected_edge(0, 1, 1.0);
  g.add_undirected_edge(0, 2, 1.0);
  g.add_undirected_edge(1, 2, 1.0);
  const auto walks = random_walks(g, {5, 2, 1.0, 1.0, 0});
  for (const Walk& w : walks) {
    if (w.front() == 3) {
      EXPECT_EQ(w.size(), 1u);  // isolated start
      continue;
    }
    ASSERT_EQ(w.size(), 2u);
    EXPECT_TRUE(g.has_edge(w[0], w[1]));
  }
}

TEST(RandomWalks, InvalidParameters) {
  WeightedGraph g = path_graph(3);
  EXPECT_THROW(random_walks(g, {1, 1, 1.0, 1.0, 0}), ContractError);
  EXPECT_THROW(random_walks(g, {1, 5, 0.0, 1.0, 0}), ContractError);
  EXPECT_THROW(random_walks(g, {1, 5, 1.0, -1.0, 0}), ContractError);
}

TEST(RandomWalks, UnbiasedWalksAreUniformOverNeighbours) {
  // Node 0 has four neighbours; with p = q = 1 each successor is equally likely.
  WeightedGraph g(5);
  for (std::size_t k = 1; k < 5; ++k) g.add_undirected_edge(0, k, 1.0);
  g.add_undirected_edge(1, 2, 1.0);
  g.add_undirected_edge(3, 4, 1.0);
  const auto node2vec = random_walks(g, {500, 100, 1.0, 1.0, 17});
  const auto deepwalk = uniform_walks(g, 500, 100, 17);
  for (const auto* corpus : {&node2vec, &deepwalk}) {
    auto counts = successor_counts(*corpus, 0, 5);
    EXPECT_EQ(counts[0], 0.0);
    counts.erase(counts.begin());
    double total = 0.0;
    for (double c : counts) total += c;
    EXPECT_GT(total, 1e4);
    // 99.9% quantile of chi-square with 3 degrees of freedom.
    EXPECT_LT(chi_square_uniform(counts), 16.27);
  }
}

TEST(RandomWalks, ReturnParameterBiasesBacktracking) {
  // On the path 0-1-2, from (prev 0, cur 1) the weights are 1/p for 0 and 1/q for 2.
  WeightedGraph g = path_graph(3);
  const double p = 0.25, q = 1.0;
  const auto walks = random_walks(g, {20000, 3, p, q, 5});
  double back = 0.0, total = 0.0;
  for (const Walk& w : walks)
    if (w[0] == 0) {
      total += 1.0;
      if (w[2] == 0) back += 1.0;
    }
  const double expected = (1.0 / p) / (1.0 / p + 1.0 / q);
  const double se = std::sqrt(expected * (1.0 - expected) / total);
  EXPECT_NEAR(back / total, expected, 4.0 * se);
}

TEST(RandomWalks, SeedDeterministic) {
  WeightedGraph g = path_graph(10);
  EXPECT_EQ(random_walks(g, {3, 20, 0.5, 2.0, 8}), random_walks(g, {3, 20, 0.5, 2.0, 8}));
  EXPECT_NE(random_walks(g, {3, 20, 0.5, 2.0, 8}), random_walks(g, {3, 20, 0.5, 2.0, 9}));
  EXPECT_EQ(uniform_walks(g, 3, 20, 4), uniform_walks(g, 3, 20, 4));
}

TEST(SkipGram, OutputShapeAndEmptyCorpus) {
  const auto walks = uniform_walks(path_graph(7), 2, 10, 0);
  Matrix m = skipgram_train(walks, 7, {5, 3, 2, 1, 0.025, 0});
  EXPECT_EQ(m.rows(), 7u);
  EXPECT_EQ(m.cols(), 5u);
  for (double v : m.values()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_THROW(skipgram_train({}, 7, {}), DataError);
  EXPECT_THROW(skipgram_train(walks, 7, {0, 3, 2, 1, 0.025, 0}), ContractError);
}

TEST(SkipGram, ZeroEpochsReturnsTheInitialisation) {
  const auto walks = uniform_walks(path_graph(6), 2, 10, 0);
  SkipGramOptions options{4, 3, 2, 0, 0.025, 12};
  Matrix m = skipgram_train(walks, 6, options);
  Rng rng(12);
  for (double v : m.values()) EXPECT_EQ(v, (rng.uniform() - 0.5) / 4.0);
  // Independent of the corpus.
  EXPECT_EQ(m, skipgram_train(uniform_walks(path_graph(6), 5, 30, 9), 6, options));
}

TEST(SkipGram, PathNeighboursEndUpCloserThanDistantNodes) {
  const std::size_t n = 50;
  const WeightedGraph g = path_graph(n);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto walks = uniform_walks(g, 10, 40, seed);
    Matrix m = skipgram_train(walks, n, {16, 5, 5, 3, 0.025, seed});
    double near = 0.0, far = 0.0;
    std::size_t near_count = 0, far_count = 0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        if (b - a == 1) {
          near += cosine(m, a, b);
          ++near_count;
        } else if (b - a >= 10) {
          far += cosine(m, a, b);
          ++far_count;
        }
      }
    EXPECT_GT(near / static_cast<double>(near_count), far / static_cast<double>(far_count)) << "seed " << seed;
  }
}

TEST(WeekLineGraph, SingleSlotPerDay) {
  WeightedGraph g = build_week_line_graph(1);
  EXPECT_EQ(g.size(), 7u);
  EXPECT_EQ(g.edge_count(), 2u * 6);  // six undirected edges
  EXPECT_FALSE(g.has_edge(6, 0));
  EXPECT_THROW(build_week_line_graph(0), ContractError);
}

TEST(WeekLineGraph, DegreesAtFullResolution) {
  const std::size_t slots = 288;
  WeightedGraph g = build_week_line_graph(slots);
  ASSERT_EQ(g.size(), 7 * slots);
  for (std::size_t v = 0; v < g.size(); ++v) {
    // Brute-force count of the path's neighbours of v.
    std::size_t expected = 0;
    for (std::size_t u = 0; u < g.size(); ++u)
      if (u + 1 == v || v + 1 == u) ++expected;
    EXPECT_EQ(g.degree(v), expected);
    EXPECT_EQ(g.row_sum(v), static_cast<double>(expected));
  }
  EXPECT_EQ(g.degree(0), 1u);
  EXPECT_EQ(g.degree(7 * slots - 1), 1u);
}

TEST(WeekLineGraph, WrapClosesTheCycle) {
  WeightedGraph g = build_week_line_graph(2, true);
  EXPECT_TRUE(g.has_edge(13, 0));
  EXPECT_TRUE(g.has_edge(0, 13));
  for (std::size_t v = 0; v < g.size(); ++v) EXPECT_EQ(g.degree(v), 2u);
}

TEST(TemporalIndex, Arithmetic) {
  EXPECT_EQ(temporal_index(0, 0, 288), 0u);
  EXPECT_EQ(temporal_index(6, 287, 288), 7u * 288 - 1);
  EXPECT_EQ(temporal_index(2, 5, 288), 581u);
  EXPECT_THROW(temporal_index(7, 0, 288), IndexError);
  EXPECT_THROW(temporal_index(0, 288, 288), IndexError);
}

TEST(Embeddings, ShapesAndSeedDeterminism) {
  Matrix adjacency(4, 4, std::vector<double>{0, 1, 0, 0, 1, 0, 0.5, 0, 0, 0.5, 0, 0, 0, 0, 0, 0});
  EmbeddingOptions options;
  options.walks_per_node = 3;
  options.walk_length = 10;
  options.epochs = 1;
  Matrix sp = spatial_embedding(adjacency, 6, options, 3);
  EXPECT_EQ(sp.rows(), 4u);
  EXPECT_EQ(sp.cols(), 6u);
  EXPECT_EQ(sp, spatial_embedding(adjacency, 6, options, 3));
  Matrix tp = temporal_embedding(4, 5, options, 3);
  EXPECT_EQ(tp.rows(), 28u);
  EXPECT_EQ(tp.cols(), 5u);
  EXPECT_EQ(tp, temporal_embedding(4, 5, options, 3));
  for (double v : tp.values()) EXPECT_TRUE(std::isfinite(v));
}
