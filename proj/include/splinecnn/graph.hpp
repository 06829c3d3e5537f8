#ifndef SPLINECNN_GRAPH_HPP
#define SPLINECNN_GRAPH_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "splinecnn/tensor.hpp"

namespace splinecnn {

/// Directed edge. (origin, target) means that `origin` aggregates features
/// from `target`; the neighborhood of i is {j : (i, j) is an edge}.
struct Edge {
  std::size_t origin = 0;
  std::size_t target = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Directed graph with per-edge pseudo-coordinates and per-node data.
///
/// Edges are kept sorted by (origin, target), so the edges of one origin form
/// a contiguous segment; `segment_begin(i)..segment_begin(i+1)` indexes them.
/// Pseudo-coordinates are optional (dimension 0 means "not computed yet"), as
/// are labels and positions.
class Graph {
 public:
  Graph() = default;

  /// Sorts the edges and validates indices. Duplicate edges are rejected.
  /// `pseudo`, when non-empty, must have one row per edge (in the given edge
  /// order) and is permuted along with the edges.
  Graph(std::size_t num_nodes, std::vector<Edge> edges, Matrix<double> pseudo = {})
      : num_nodes_(num_nodes) {
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (edges[e].origin >= num_nodes || edges[e].target >= num_nodes)
        throw std::invalid_argument("Graph: edge " + std::to_string(e) + " (" +
                                    std::to_string(edges[e].origin) + "," +
                                    std::to_string(edges[e].target) + ") out of range for " +
                                    std::to_string(num_nodes) + " nodes");
    }
    if (!pseudo.empty() && pseudo.rows() != edges.size())
      throw std::invalid_argument("Graph: pseudo has " + std::to_string(pseudo.rows()) +
                                  " rows for " + std::to_string(edges.size()) + " edges");

    std::vector<std::size_t> order(edges.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return edges[a] < edges[b]; });
    edges_.reserve(edges.size());
    for (std::size_t e : order) edges_.push_back(edges[e]);
    for (std::size_t e = 1; e < edges_.size(); ++e) {
      if (edges_[e] == edges_[e - 1])
        throw std::invalid_argument("Graph: duplicate edge (" + std::to_string(edges_[e].origin) +
                                    "," + std::to_string(edges_[e].target) + ")");
    }
    if (!pseudo.empty()) {
      Matrix<double> sorted(pseudo.rows(), pseudo.cols());
      for (std::size_t e = 0; e < order.size(); ++e) {
        auto src = pseudo.row(order[e]);
        std::copy(src.begin(), src.end(), sorted.row(e).begin());
      }
      set_pseudo(std::move(sorted));
    }

    segments_.assign(num_nodes_ + 1, 0);
    for (const Edge& e : edges_) ++segments_[e.origin + 1];
    std::partial_sum(segments_.begin(), segments_.end(), segments_.begin());
  }

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }
  const Edge& edge(std::size_t e) const noexcept { return edges_[e]; }

  /// First edge whose origin is `node`; valid for node in [0, N].
  std::size_t segment_begin(std::size_t node) const noexcept { return segments_[node]; }
  std::span<const std::size_t> segments() const noexcept { return segments_; }
  /// |N(i)|, the number of edges with origin i.
  std::size_t degree(std::size_t node) const noexcept {
    return segments_[node + 1] - segments_[node];
  }
  std::size_t max_degree() const noexcept {
    std::size_t best = 0;
    for (std::size_t i = 0; i < num_nodes_; ++i) best = std::max(best, degree(i));
    return best;
  }

  std::size_t pseudo_dim() const noexcept { return pseudo_.cols(); }
  const Matrix<double>& pseudo() const noexcept { return pseudo_; }
  void set_pseudo(Matrix<double> pseudo) {
    if (pseudo.rows() != edges_.size())
      throw std::invalid_argument("Graph: pseudo row count does not match edge count");
    for (double v : pseudo.flat()) {
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("Graph: pseudo-coordinate " + std::to_string(v) +
                                    " outside [0,1]");
    }
    pseudo_ = std::move(pseudo);
  }
  void clear_pseudo() { pseudo_ = {}; }

  std::size_t feature_dim() const noexcept { return features_.cols(); }
  const Matrix<double>& features() const noexcept { return features_; }
  void set_features(Matrix<double> features) {
    if (features.rows() != num_nodes_ && !(features.empty() && features.cols() == 0))
      throw std::invalid_argument("Graph: feature row count does not match node count");
    features_ = std::move(features);
  }

  bool has_labels() const noexcept { return labels_.has_value(); }
  const std::optional<std::vector<int>>& labels() const noexcept { return labels_; }
  void set_labels(std::vector<int> labels) {
    if (labels.size() != num_nodes_)
      throw std::invalid_argument("Graph: label count does not match node count");
    labels_ = std::move(labels);
  }

  std::size_t position_dim() const noexcept { return positions_.cols(); }
  bool has_positions() const noexcept { return positions_.cols() > 0; }
  const Matrix<double>& positions() const noexcept { return positions_; }
  void set_positions(Matrix<double> positions) {
    if (positions.rows() != num_nodes_)
      throw std::invalid_argument("Graph: position row count does not match node count");
    positions_ = std::move(positions);
  }

  /// Edge index of (origin, target), or num_edges() when absent.
  std::size_t find_edge(std::size_t origin, std::size_t target) const noexcept {
    auto first = edges_.begin() + static_cast<std::ptrdiff_t>(segments_[origin]);
    auto last = edges_.begin() + static_cast<std::ptrdiff_t>(segments_[origin + 1]);
    auto it = std::lower_bound(first, last, Edge{origin, target});
    if (it != last && it->target == target) return static_cast<std::size_t>(it - edges_.begin());
    return edges_.size();
  }

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> segments_{0};
  Matrix<double> pseudo_;
  Matrix<double> features_;
  std::optional<std::vector<int>> labels_;
  Matrix<double> positions_;
};

/// Block-diagonal union of several graphs. Example k owns nodes
/// [node_offsets[k], node_offsets[k+1]) and, because edges are sorted by
/// origin, edges [edge_offsets[k], edge_offsets[k+1]).
struct Batch {
  Graph graph;
  std::vector<std::size_t> node_offsets{0};
  std::vector<std::size_t> edge_offsets{0};

  std::size_t example_count() const noexcept { return node_offsets.size() - 1; }
  std::size_t nodes_in(std::size_t example) const noexcept {
    return node_offsets[example + 1] - node_offsets[example];
  }
};

/// Wraps a single graph as a one-example batch.
inline Batch single_batch(Graph graph) {
  Batch batch;
  batch.node_offsets = {0, graph.num_nodes()};
  batch.edge_offsets = {0, graph.num_edges()};
  batch.graph = std::move(graph);
  return batch;
}

/// Concatenates graphs into one block-diagonal graph. All graphs must agree on
/// pseudo dimension, feature dimension, position dimension and label presence.
inline Batch batch_graphs(std::span<const Graph> graphs) {
  Batch batch;
  if (graphs.empty()) return batch;
  const Graph& first = graphs.front();
  std::size_t total_nodes = 0, total_edges = 0;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const Graph& graph = graphs[g];
    if (graph.pseudo_dim() != first.pseudo_dim())
      throw std::invalid_argument("batch_graphs: graph " + std::to_string(g) +
                                  " has pseudo dimension " + std::to_string(graph.pseudo_dim()) +
                                  ", expected " + std::to_string(first.pseudo_dim()));
    if (graph.feature_dim() != first.feature_dim())
      throw std::invalid_argument("batch_graphs: graph " + std::to_string(g) +
                                  " has feature dimension " + std::to_string(graph.feature_dim()) +
                                  ", expected " + std::to_string(first.feature_dim()));
    if (graph.position_dim() != first.position_dim() || graph.has_labels() != first.has_labels())
      throw std::invalid_argument("batch_graphs: graph " + std::to_string(g) +
                                  " differs in positions or labels");
    total_nodes += graph.num_nodes();
    total_edges += graph.num_edges();
  }

  std::vector<Edge> edges;
  edges.reserve(total_edges);
  const std::size_t d = first.pseudo_dim();
  Matrix<double> pseudo(d ? total_edges : 0, d);
  Matrix<double> features(total_nodes, first.feature_dim());
  Matrix<double> positions(total_nodes, first.position_dim());
  std::vector<int> labels;
  std::size_t node_base = 0, edge_base = 0;
  for (const Graph& graph : graphs) {
    for (const Edge& e : graph.edges()) edges.push_back({e.origin + node_base, e.target + node_base});
    if (d) std::copy_n(graph.pseudo().data(), graph.pseudo().size(), pseudo.data() + edge_base * d);
    std::copy_n(graph.features().data(), graph.features().size(),
                features.data() + node_base * first.feature_dim());
    std::copy_n(graph.positions().data(), graph.positions().size(),
                positions.data() + node_base * first.position_dim());
    if (graph.has_labels()) labels.insert(labels.end(), graph.labels()->begin(), graph.labels()->end());
    node_base += graph.num_nodes();
    edge_base += graph.num_edges();
    batch.node_offsets.push_back(node_base);
    batch.edge_offsets.push_back(edge_base);
  }
  // Edges are already in sorted order: blocks are sorted and offsets increase.
  batch.graph = Graph(total_nodes, std::move(edges), std::move(pseudo));
  batch.graph.set_features(std::move(features));
  if (first.position_dim()) batch.graph.set_positions(std::move(positions));
  if (first.has_labels()) batch.graph.set_labels(std::move(labels));
  return batch;
}

inline Batch batch_graphs(const std::vector<Graph>& graphs) {
  return batch_graphs(std::span<const Graph>(graphs));
}

enum class Neighborhood { cross4, full8, full24 };

/// Image lattice: node y*width + x sits at position (x, y). Border nodes get
/// truncated neighborhoods. Pseudo-coordinates are left unset.
inline Graph build_grid_graph(std::size_t width, std::size_t height, Neighborhood neighborhood,
                              bool include_self) {
  if (width == 0 || height == 0)
    throw std::invalid_argument("build_grid_graph: width and height must be positive");
  const long reach = neighborhood == Neighborhood::full24 ? 2 : 1;
  std::vector<Edge> edges;
  const long w = static_cast<long>(width), h = static_cast<long>(height);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (long dy = -reach; dy <= reach; ++dy) {
        for (long dx = -reach; dx <= reach; ++dx) {
          if (dx == 0 && dy == 0 && !include_self) continue;
          if (neighborhood == Neighborhood::cross4 && std::abs(dx) + std::abs(dy) > 1) continue;
          const long nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          edges.push_back({static_cast<std::size_t>(y * w + x), static_cast<std::size_t>(ny * w + nx)});
        }
      }
    }
  }
  Graph graph(width * height, std::move(edges));
  Matrix<double> positions(width * height, 2);
  for (std::size_t i = 0; i < width * height; ++i) {
    positions(i, 0) = static_cast<double>(i % width);
    positions(i, 1) = static_cast<double>(i / width);
  }
  graph.set_positions(std::move(positions));
  return graph;
}

}  // namespace splinecnn

#endif  // SPLINECNN_GRAPH_HPP
