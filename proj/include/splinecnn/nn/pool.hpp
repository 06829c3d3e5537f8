#ifndef SPLINECNN_NN_POOL_HPP
#define SPLINECNN_NN_POOL_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "splinecnn/error.hpp"
#include "splinecnn/graph.hpp"
#include "splinecnn/pseudo.hpp"
#include "splinecnn/tensor.hpp"

namespace splinecnn::nn {

/// Coarsened structure produced by one pooling step. `cluster[n]` is the
/// coarse node of fine node n; coarse example boundaries follow the fine ones.
struct Coarsening {
  Batch coarse;
  std::vector<std::size_t> cluster;
  std::size_t cluster_count = 0;
};

/// Output of graclus_pool: the coarsening plus, per (cluster, feature), the
/// fine node that supplied the maximum.
template <class T>
struct PoolResult {
  Coarsening coarsening;
  Matrix<std::size_t> argmax_index;
};

namespace detail {

/// One greedy matching level. Nodes are visited per example in a seeded
/// random order (ascending when no seed is given); an unmatched node pairs
/// with its unmatched neighbor of smallest index, else stays a singleton.
/// Cluster ids are assigned in ascending order of each cluster's smallest
/// member, so ids are contiguous and example-ordered.
inline std::vector<std::size_t> match_level(const Batch& batch, std::optional<std::uint64_t> seed,
                                            std::size_t& cluster_count, std::vector<std::size_t>& coarse_offsets) {
  const Graph& g = batch.graph;
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> mate(g.num_nodes(), none);
  for (std::size_t k = 0; k < batch.example_count(); ++k) {
    const std::size_t nb = batch.node_offsets[k], ne = batch.node_offsets[k + 1];
    std::vector<std::size_t> order(ne - nb);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = nb + i;
    if (seed) {
      // Every example restarts the stream, so identical examples get
      // identical clusterings.
      std::mt19937_64 rng(*seed);
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    }
    for (std::size_t n : order) {
      if (mate[n] != none) continue;
      std::size_t best = none;
      for (std::size_t e = g.segment_begin(n); e < g.segment_begin(n + 1); ++e) {
        const std::size_t j = g.edge(e).target;
        if (j != n && mate[j] == none) {
          best = j;  // edges are sorted by target: first hit is the smallest
          break;
        }
      }
      if (best == none) {
        mate[n] = n;
      } else {
        mate[n] = best;
        mate[best] = n;
      }
    }
  }
  std::vector<std::size_t> cluster(g.num_nodes(), none);
  cluster_count = 0;
  coarse_offsets.assign(1, 0);
  for (std::size_t k = 0; k < batch.example_count(); ++k) {
    for (std::size_t n = batch.node_offsets[k]; n < batch.node_offsets[k + 1]; ++n) {
      if (cluster[n] != none) continue;
      cluster[n] = cluster_count;
      cluster[mate[n]] = cluster_count;
      ++cluster_count;
    }
    coarse_offsets.push_back(cluster_count);
  }
  return cluster;
}

}  // namespace detail

/// Graclus-style coarsening: ceil(log2 c) greedy matching levels (c = 2 -> 1,
/// c = 4 -> 2). Coarse positions are member centroids; coarse edges are the
/// deduplicated images of edges between distinct clusters, plus (c, c) for
/// clusters containing a self-loop. Pseudo-coordinates of the coarse graph
/// are refitted per example with `kind`.
inline Coarsening graclus_coarsen(const Batch& batch, std::size_t cluster_size, std::optional<std::uint64_t> seed,
                                  PseudoKind kind) {
  if (cluster_size != 2 && cluster_size != 4)
    throw std::invalid_argument("graclus pooling supports cluster sizes 2 and 4, got " + std::to_string(cluster_size));
  const Graph& fine = batch.graph;
  if (!fine.has_positions()) throw GeometryError("graclus pooling needs node positions");

  const std::size_t levels = cluster_size == 2 ? 1 : 2;
  std::vector<std::size_t> cluster(fine.num_nodes());
  for (std::size_t n = 0; n < cluster.size(); ++n) cluster[n] = n;
  std::size_t count = fine.num_nodes();
  std::vector<std::size_t> offsets = batch.node_offsets;
  Batch level_batch;
  const Batch* current = &batch;
  for (std::size_t level = 0; level < levels; ++level) {
    std::vector<std::size_t> coarse_offsets;
    const auto step = detail::match_level(*current, seed ? std::optional<std::uint64_t>(*seed + level) : std::nullopt,
                                          count, coarse_offsets);
    for (auto& c : cluster) c = step[c];
    offsets = coarse_offsets;
    if (level + 1 < levels) {
      // Intermediate structure only needs edges for the next matching.
      std::set<Edge> edges;
      for (const Edge& e : current->graph.edges()) {
        const std::size_t a = step[e.origin], b = step[e.target];
        if (a != b) edges.insert({a, b});
      }
      level_batch.graph = Graph(count, std::vector<Edge>(edges.begin(), edges.end()));
      level_batch.node_offsets = offsets;
      current = &level_batch;
    }
  }

  std::set<Edge> edges;
  for (const Edge& e : fine.edges()) {
    const std::size_t a = cluster[e.origin], b = cluster[e.target];
    if (a != b || e.origin == e.target) edges.insert({a, b});
  }
  Matrix<double> positions(count, fine.position_dim());
  std::vector<std::size_t> members(count, 0);
  for (std::size_t n = 0; n < fine.num_nodes(); ++n) {
    ++members[cluster[n]];
    for (std::size_t a = 0; a < fine.position_dim(); ++a) positions(cluster[n], a) += fine.positions()(n, a);
  }
  for (std::size_t c = 0; c < count; ++c)
    for (std::size_t a = 0; a < fine.position_dim(); ++a) positions(c, a) /= static_cast<double>(members[c]);

  Coarsening out;
  out.cluster = std::move(cluster);
  out.cluster_count = count;
  out.coarse.graph = Graph(count, std::vector<Edge>(edges.begin(), edges.end()));
  out.coarse.graph.set_positions(std::move(positions));
  out.coarse.node_offsets = offsets;
  out.coarse.edge_offsets.assign(1, 0);
  for (std::size_t k = 0; k + 1 < offsets.size(); ++k)
    out.coarse.edge_offsets.push_back(out.coarse.graph.segment_begin(offsets[k + 1]));
  if (fine.pseudo_dim() || kind == PseudoKind::degree1) fit_and_apply(out.coarse, kind, true);
  return out;
}

/// Per-cluster, per-feature maximum. Fills `argmax` with the source node.
template <class T>
Matrix<T> max_pool(const Matrix<T>& x, const Coarsening& coarsening, Matrix<std::size_t>* argmax = nullptr) {
  if (x.rows() != coarsening.cluster.size()) throw std::invalid_argument("max_pool: feature rows do not match graph");
  const std::size_t m = x.cols();
  Matrix<T> y(coarsening.cluster_count, m, -std::numeric_limits<T>::infinity());
  Matrix<std::size_t> arg(coarsening.cluster_count, m, 0);
  for (std::size_t n = 0; n < x.rows(); ++n) {
    const std::size_t c = coarsening.cluster[n];
    const T* xr = x.row(n).data();
    T* yr = y.row(c).data();
    std::size_t* ar = arg.row(c).data();
    for (std::size_t f = 0; f < m; ++f) {
      if (xr[f] > yr[f]) {
        yr[f] = xr[f];
        ar[f] = n;
      }
    }
  }
  if (argmax) *argmax = std::move(arg);
  return y;
}

/// Routes each pooled gradient to the node that supplied the maximum.
template <class T>
Matrix<T> max_pool_backward(const Matrix<std::size_t>& argmax, const Matrix<T>& grad_y, std::size_t fine_nodes) {
  if (argmax.rows() != grad_y.rows() || argmax.cols() != grad_y.cols())
    throw std::invalid_argument("max_pool_backward: shape mismatch");
  Matrix<T> grad_x(fine_nodes, grad_y.cols());
  for (std::size_t c = 0; c < grad_y.rows(); ++c)
    for (std::size_t f = 0; f < grad_y.cols(); ++f) grad_x(argmax(c, f), f) += grad_y(c, f);
  return grad_x;
}

/// Coarsens the graph and max-pools `features` in one call.
template <class T>
std::pair<PoolResult<T>, Matrix<T>> graclus_pool(const Batch& batch, const Matrix<T>& features,
                                                 std::size_t cluster_size, std::optional<std::uint64_t> seed,
                                                 PseudoKind kind) {
  PoolResult<T> result;
  result.coarsening = graclus_coarsen(batch, cluster_size, seed, kind);
  Matrix<T> pooled = max_pool(features, result.coarsening, &result.argmax_index);
  return {std::move(result), std::move(pooled)};
}

/// Mean over the nodes of each example: rows = examples.
template <class T>
Matrix<T> global_avg_pool(const Matrix<T>& x, std::span<const std::size_t> node_offsets) {
  const std::size_t examples = node_offsets.size() - 1;
  if (node_offsets.back() != x.rows()) throw std::invalid_argument("global_avg_pool: offsets do not cover the input");
  Matrix<T> y(examples, x.cols());
  for (std::size_t k = 0; k < examples; ++k) {
    const std::size_t nb = node_offsets[k], ne = node_offsets[k + 1];
    if (ne == nb) continue;
    for (std::size_t n = nb; n < ne; ++n)
      for (std::size_t f = 0; f < x.cols(); ++f) y(k, f) += x(n, f);
    const T inv = T{1} / static_cast<T>(ne - nb);
    for (std::size_t f = 0; f < x.cols(); ++f) y(k, f) *= inv;
  }
  return y;
}

template <class T>
Matrix<T> global_avg_pool_backward(const Matrix<T>& grad_y, std::span<const std::size_t> node_offsets) {
  Matrix<T> grad_x(node_offsets.back(), grad_y.cols());
  for (std::size_t k = 0; k + 1 < node_offsets.size(); ++k) {
    const std::size_t nb = node_offsets[k], ne = node_offsets[k + 1];
    if (ne == nb) continue;
    const T inv = T{1} / static_cast<T>(ne - nb);
    for (std::size_t n = nb; n < ne; ++n)
      for (std::size_t f = 0; f < grad_y.cols(); ++f) grad_x(n, f) = grad_y(k, f) * inv;
  }
  return grad_x;
}

}  // namespace splinecnn::nn

#endif  // SPLINECNN_NN_POOL_HPP
