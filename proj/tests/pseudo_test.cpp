#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "splinecnn/pseudo.hpp"

using namespace splinecnn;

namespace {
Graph with_positions(std::size_t n, std::vector<Edge> edges, std::vector<double> pos, std::size_t dim) {
  Graph g(n, std::move(edges));
  g.set_positions(Matrix<double>(n, dim, std::move(pos)));
  return g;
}

Graph random_cloud(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && (i + 2 * j) % 3 == 0) edges.push_back({i, j});
  std::normal_distribution<double> dist;
  std::vector<double> pos(n * dim);
  for (double& v : pos) v = dist(rng);
  return with_positions(n, edges, pos, dim);
}
}  // namespace

TEST(Pseudo, Cartesian2OnUnitOffsets) {
  Graph g = with_positions(3, {{0, 1}, {0, 2}, {1, 0}}, {0, 0, 2, 0, 0, -1}, 2);
  const PseudoSpec spec = fit_and_apply(g, PseudoKind::cartesian2);
  EXPECT_DOUBLE_EQ(spec.scale, 2.0);
  EXPECT_DOUBLE_EQ(g.pseudo()(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(g.pseudo()(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(g.pseudo()(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(g.pseudo()(1, 1), 0.25);
  EXPECT_DOUBLE_EQ(g.pseudo()(2, 0), 0.0);
}

TEST(Pseudo, GridCartesianHitsKnots) {
  Graph g = build_grid_graph(5, 5, Neighborhood::full24, true);
  fit_and_apply(g, PseudoKind::cartesian2);
  for (double v : g.pseudo().flat()) {
    const double q = v * 4.0;
    EXPECT_NEAR(q, std::round(q), 1e-12);
  }
}

TEST(Pseudo, Antisymmetry) {
  std::mt19937_64 rng(3);
  for (PseudoKind kind : {PseudoKind::cartesian2, PseudoKind::cartesian3}) {
    const std::size_t dim = kind == PseudoKind::cartesian2 ? 2 : 3;
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        if (i != j) edges.push_back({i, j});
    std::normal_distribution<double> dist;
    std::vector<double> pos(6 * dim);
    for (double& v : pos) v = dist(rng);
    Graph g = with_positions(6, edges, pos, dim);
    fit_and_apply(g, kind);
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
      const std::size_t r = g.find_edge(g.edge(e).target, g.edge(e).origin);
      for (std::size_t a = 0; a < dim; ++a) EXPECT_NEAR(g.pseudo()(e, a) + g.pseudo()(r, a), 1.0, 1e-12);
    }
  }
}

TEST(Pseudo, PolarValues) {
  Graph g = with_positions(3, {{0, 1}, {0, 2}, {0, 0}}, {0, 0, 1, 0, 0, -2}, 2);
  fit_and_apply(g, PseudoKind::polar2);
  // self-loop
  EXPECT_DOUBLE_EQ(g.pseudo()(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g.pseudo()(0, 1), 0.5);
  // (1, 0): rho 1/2, angle 0
  EXPECT_DOUBLE_EQ(g.pseudo()(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(g.pseudo()(1, 1), 0.5);
  // (0, -2): rho 1, angle -pi/2
  EXPECT_DOUBLE_EQ(g.pseudo()(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(g.pseudo()(2, 1), 0.25);
}

TEST(Pseudo, SphericalValues) {
  Graph g = with_positions(3, {{0, 1}, {0, 2}}, {0, 0, 0, 0, 0, 2, 1, 0, 0}, 3);
  fit_and_apply(g, PseudoKind::spherical3);
  EXPECT_DOUBLE_EQ(g.pseudo()(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(g.pseudo()(0, 2), 0.0);  // straight up
  EXPECT_DOUBLE_EQ(g.pseudo()(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(g.pseudo()(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(g.pseudo()(1, 2), 0.5);
}

TEST(Pseudo, DegreeOnStar) {
  // center 0 with five leaves, both directions
  std::vector<Edge> edges;
  for (std::size_t l = 1; l <= 5; ++l) {
    edges.push_back({0, l});
    edges.push_back({l, 0});
  }
  Graph g(6, edges);
  const PseudoSpec spec = fit_and_apply(g, PseudoKind::degree1);
  EXPECT_DOUBLE_EQ(spec.scale, 5.0);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const double expected = g.edge(e).target == 0 ? 1.0 : 0.2;
    EXPECT_DOUBLE_EQ(g.pseudo()(e, 0), expected);
  }
}

TEST(Pseudo, RotationCovarianceOfPolarRadius) {
  std::mt19937_64 rng(11);
  Graph g = random_cloud(7, 2, rng);
  Graph r = g;
  const double t = 0.7;
  Matrix<double> pos = g.positions();
  for (std::size_t i = 0; i < pos.rows(); ++i) {
    const double x = pos(i, 0), y = pos(i, 1);
    pos(i, 0) = std::cos(t) * x - std::sin(t) * y + 3.0;
    pos(i, 1) = std::sin(t) * x + std::cos(t) * y - 1.0;
  }
  r.set_positions(pos);
  fit_and_apply(g, PseudoKind::polar2);
  fit_and_apply(r, PseudoKind::polar2);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    EXPECT_NEAR(g.pseudo()(e, 0), r.pseudo()(e, 0), 1e-12);
    double shift = r.pseudo()(e, 1) - g.pseudo()(e, 1) - t / (2 * std::numbers::pi);
    shift -= std::round(shift);
    EXPECT_NEAR(shift, 0.0, 1e-12);
  }
}

TEST(Pseudo, TranslationAndScaleInvariance) {
  std::mt19937_64 rng(5);
  for (PseudoKind kind : {PseudoKind::cartesian3, PseudoKind::spherical3}) {
    Graph g = random_cloud(8, 3, rng);
    Graph h = g;
    Matrix<double> pos = g.positions();
    for (double& v : pos.flat()) v = 4.0 * v + 9.0;
    h.set_positions(pos);
    fit_and_apply(g, kind);
    fit_and_apply(h, kind);
    for (std::size_t k = 0; k < g.pseudo().size(); ++k) EXPECT_NEAR(g.pseudo().flat()[k], h.pseudo().flat()[k], 1e-12);
  }
}

TEST(Pseudo, RecomputeIsIdempotent) {
  std::mt19937_64 rng(9);
  Graph g = random_cloud(9, 2, rng);
  const PseudoSpec spec = fit_and_apply(g, PseudoKind::cartesian2);
  const Matrix<double> first = g.pseudo();
  recompute_pseudo(g, spec, Scaling::reuse);
  EXPECT_EQ(g.pseudo(), first);
  fit_and_apply(g, PseudoKind::cartesian2);
  EXPECT_EQ(g.pseudo(), first);
  for (double v : first.flat()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(Pseudo, NoEdgesIsNoOp) {
  Graph g = with_positions(2, {}, {0, 0, 1, 1}, 2);
  EXPECT_NO_THROW(fit_and_apply(g, PseudoKind::polar2));
  EXPECT_EQ(g.pseudo().rows(), 0u);
  EXPECT_EQ(g.pseudo_dim(), 2u);
}

TEST(Pseudo, Errors) {
  Graph same = with_positions(2, {{0, 1}}, {1, 1, 1, 1}, 2);
  EXPECT_THROW(fit_and_apply(same, PseudoKind::cartesian2), GeometryError);
  Graph none(2, {{0, 1}});
  EXPECT_THROW(fit_and_apply(none, PseudoKind::polar2), GeometryError);
  Graph flat = with_positions(2, {{0, 1}}, {0, 0, 1, 0}, 2);
  EXPECT_THROW(fit_and_apply(flat, PseudoKind::spherical3), GeometryError);
  EXPECT_THROW(parse_pseudo_kind("hyperbolic", 2), std::invalid_argument);
  EXPECT_EQ(parse_pseudo_kind("cartesian", 3), PseudoKind::cartesian3);
  EXPECT_EQ(parse_pseudo_kind("degree", 0), PseudoKind::degree1);
}

TEST(Pseudo, ReusedScaleOutsideRangeIsReported) {
  Graph g = with_positions(2, {{0, 1}}, {0, 0, 3, 0}, 2);
  EXPECT_THROW(recompute_pseudo(g, PseudoSpec{PseudoKind::cartesian2, 1.0}, Scaling::reuse), GeometryError);
}

TEST(Pseudo, BatchFitsPerExample) {
  Graph a = with_positions(2, {{0, 1}, {1, 0}}, {0, 0, 1, 0}, 2);
  Graph b = with_positions(2, {{0, 1}, {1, 0}}, {0, 0, 0, 5}, 2);
  a.set_features(Matrix<double>(2, 1));
  b.set_features(Matrix<double>(2, 1));
  Batch batch = batch_graphs(std::vector<Graph>{a, b});
  const auto specs = fit_and_apply(batch, PseudoKind::cartesian2);
  ASSERT_EQ(specs.size(), 2u);
  EXPECT_DOUBLE_EQ(specs[0].scale, 1.0);
  EXPECT_DOUBLE_EQ(specs[1].scale, 5.0);
  EXPECT_DOUBLE_EQ(batch.graph.pseudo()(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(batch.graph.pseudo()(2, 1), 1.0);
}

TEST(Pseudo, CartesianRangeIsTight) {
  std::mt19937_64 rng(21);
  Graph g = random_cloud(10, 2, rng);
  fit_and_apply(g, PseudoKind::cartesian2);
  const auto [lo, hi] = std::minmax_element(g.pseudo().flat().begin(), g.pseudo().flat().end());
  EXPECT_GE(*lo, 0.0);
  EXPECT_LE(*hi, 1.0);
  EXPECT_TRUE(*lo == 0.0 || *hi == 1.0);
}

TEST(Pseudo, DegreeValuesBoundedByMaxDegree) {
  std::mt19937_64 rng(4);
  Graph g = random_cloud(12, 2, rng);
  fit_and_apply(g, PseudoKind::degree1);
  std::set<double> distinct(g.pseudo().flat().begin(), g.pseudo().flat().end());
  EXPECT_LE(distinct.size(), g.max_degree());
  EXPECT_EQ(*distinct.rbegin(), 1.0);
}
