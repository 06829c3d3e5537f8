#include <gtest/gtest.h>

#include <algorithm>

#include "splinecnn/graph.hpp"

using namespace splinecnn;

TEST(GridGraph, Full8ThreeByThree) {
  const Graph g = build_grid_graph(3, 3, Neighborhood::full8, false);
  EXPECT_EQ(g.num_nodes(), 9u);
  EXPECT_EQ(g.num_edges(), 40u);
  EXPECT_EQ(g.degree(4), 8u);  // center
  for (std::size_t corner : {0u, 2u, 6u, 8u}) EXPECT_EQ(g.degree(corner), 3u);
  for (std::size_t side : {1u, 3u, 5u, 7u}) EXPECT_EQ(g.degree(side), 5u);
}

TEST(GridGraph, SinglePixelHasNoEdges) {
  const Graph g = build_grid_graph(1, 1, Neighborhood::full8, false);
  EXPECT_EQ(g.num_nodes(), 1u);
  EXPECT_EQ(g.num_edges(), 0u);
}

TEST(GridGraph, Cross4WithSelfLoops) {
  const Graph g = build_grid_graph(2, 2, Neighborhood::cross4, true);
  EXPECT_EQ(g.num_nodes(), 4u);
  EXPECT_EQ(g.num_edges(), 12u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(g.degree(i), 3u);
    EXPECT_NE(g.find_edge(i, i), g.num_edges());
  }
}

TEST(GridGraph, Full24InteriorDegreeAndEdgeSum) {
  const Graph g = build_grid_graph(7, 6, Neighborhood::full24, false);
  EXPECT_EQ(g.degree(3 * 7 + 3), 24u);
  std::size_t sum = 0;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) sum += g.degree(i);
  EXPECT_EQ(sum, g.num_edges());
}

TEST(GridGraph, InteriorFull8DegreeIsEight) {
  const Graph g = build_grid_graph(6, 5, Neighborhood::full8, false);
  for (std::size_t y = 1; y + 1 < 5; ++y)
    for (std::size_t x = 1; x + 1 < 6; ++x) EXPECT_EQ(g.degree(y * 6 + x), 8u);
}

TEST(GridGraph, PositionsArePixelCoordinates) {
  const Graph g = build_grid_graph(4, 3, Neighborhood::cross4, false);
  ASSERT_EQ(g.position_dim(), 2u);
  EXPECT_EQ(g.positions()(6, 0), 2.0);
  EXPECT_EQ(g.positions()(6, 1), 1.0);
  EXPECT_EQ(g.pseudo_dim(), 0u);
}

TEST(GridGraph, ZeroSizeRejected) {
  EXPECT_THROW(build_grid_graph(0, 3, Neighborhood::full8, false), std::invalid_argument);
  EXPECT_THROW(build_grid_graph(3, 0, Neighborhood::full8, false), std::invalid_argument);
}

TEST(Graph, RejectsDuplicateAndOutOfRangeEdges) {
  EXPECT_THROW(Graph(3, {{0, 1}, {0, 1}}), std::invalid_argument);
  EXPECT_THROW(Graph(3, {{0, 3}}), std::invalid_argument);
  EXPECT_THROW(Graph(3, {{5, 0}}), std::invalid_argument);
}

TEST(Graph, EdgesSortedByOriginWithPseudoPermuted) {
  Matrix<double> pseudo(3, 1);
  pseudo(0, 0) = 0.1;
  pseudo(1, 0) = 0.2;
  pseudo(2, 0) = 0.3;
  const Graph g(3, {{2, 0}, {0, 1}, {1, 2}}, pseudo);
  ASSERT_EQ(g.num_edges(), 3u);
  EXPECT_EQ(g.edge(0).origin, 0u);
  EXPECT_DOUBLE_EQ(g.pseudo()(0, 0), 0.2);
  EXPECT_EQ(g.edge(2).origin, 2u);
  EXPECT_DOUBLE_EQ(g.pseudo()(2, 0), 0.1);
}

TEST(Graph, PseudoMustLieInUnitInterval) {
  Matrix<double> bad(1, 1);
  bad(0, 0) = 1.5;
  EXPECT_THROW(Graph(2, {{0, 1}}, bad), std::invalid_argument);
}

TEST(Graph, DegreeCacheMatchesEdges) {
  const Graph g(5, {{0, 1}, {0, 2}, {3, 0}, {0, 4}, {3, 3}});
  EXPECT_EQ(g.degree(0), 3u);
  EXPECT_EQ(g.degree(1), 0u);
  EXPECT_EQ(g.degree(3), 2u);
  EXPECT_EQ(g.max_degree(), 3u);
}

namespace {
Graph small(std::size_t n, std::vector<Edge> edges, std::size_t d) {
  Matrix<double> pseudo(edges.size(), d, 0.25);
  Graph g(n, std::move(edges), std::move(pseudo));
  g.set_features(Matrix<double>(n, 2, 1.0));
  return g;
}
}  // namespace

TEST(Batch, ConcatenatesWithOffsets) {
  const Graph a = small(3, {{0, 1}, {1, 0}, {1, 2}, {2, 1}}, 2);
  const Graph b = small(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {2, 2}}, 2);
  const Batch batch = batch_graphs(std::vector<Graph>{a, b});
  EXPECT_EQ(batch.graph.num_nodes(), 8u);
  EXPECT_EQ(batch.graph.num_edges(), 10u);
  EXPECT_EQ(batch.node_offsets, (std::vector<std::size_t>{0, 3, 8}));
  EXPECT_EQ(batch.edge_offsets, (std::vector<std::size_t>{0, 4, 10}));
  EXPECT_EQ(batch.example_count(), 2u);
  for (const Edge& e : batch.graph.edges()) {
    const bool first = e.origin < 3;
    EXPECT_EQ(first, e.target < 3) << "edge crosses examples";
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(batch.graph.degree(i), a.degree(i));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(batch.graph.degree(3 + i), b.degree(i));
}

TEST(Batch, SingleGraphIsIdentity) {
  const Graph a = small(4, {{0, 1}, {2, 3}}, 1);
  const Batch batch = batch_graphs(std::vector<Graph>{a});
  EXPECT_EQ(batch.node_offsets, (std::vector<std::size_t>{0, 4}));
  EXPECT_EQ(batch.graph.num_edges(), a.num_edges());
  EXPECT_EQ(batch.graph.pseudo(), a.pseudo());
  EXPECT_EQ(batch.graph.features(), a.features());
}

TEST(Batch, MismatchedPseudoDimensionRejected) {
  const Graph a = small(3, {{0, 1}}, 2);
  const Graph b = small(3, {{0, 1}}, 3);
  EXPECT_THROW(batch_graphs(std::vector<Graph>{a, b}), std::invalid_argument);
}

TEST(Batch, MismatchedFeatureDimensionRejected) {
  Graph a = small(3, {{0, 1}}, 2);
  Graph b = small(3, {{0, 1}}, 2);
  b.set_features(Matrix<double>(3, 5));
  EXPECT_THROW(batch_graphs(std::vector<Graph>{a, b}), std::invalid_argument);
}
