#ifndef SPLINECNN_PSEUDO_HPP
#define SPLINECNN_PSEUDO_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "splinecnn/error.hpp"
#include "splinecnn/graph.hpp"

namespace splinecnn {

enum class PseudoKind { cartesian2, cartesian3, polar2, spherical3, degree1 };

inline std::size_t pseudo_dim(PseudoKind kind) noexcept {
  switch (kind) {
    case PseudoKind::cartesian2: return 2;
    case PseudoKind::cartesian3: return 3;
    case PseudoKind::polar2: return 2;
    case PseudoKind::spherical3: return 3;
    case PseudoKind::degree1: return 1;
  }
  return 0;
}

inline std::string_view to_string(PseudoKind kind) noexcept {
  switch (kind) {
    case PseudoKind::cartesian2: return "cartesian2";
    case PseudoKind::cartesian3: return "cartesian3";
    case PseudoKind::polar2: return "polar2";
    case PseudoKind::spherical3: return "spherical3";
    case PseudoKind::degree1: return "degree1";
  }
  return "?";
}

/// Resolves the config spelling (`cartesian|polar|spherical|degree`) against
/// the dimension of the positions it will be applied to.
inline PseudoKind parse_pseudo_kind(std::string_view name, std::size_t position_dim) {
  if (name == "degree" || name == "degree1") return PseudoKind::degree1;
  if (name == "cartesian2") return PseudoKind::cartesian2;
  if (name == "cartesian3") return PseudoKind::cartesian3;
  if (name == "polar" || name == "polar2") return PseudoKind::polar2;
  if (name == "spherical" || name == "spherical3") return PseudoKind::spherical3;
  if (name == "cartesian") {
    if (position_dim == 2) return PseudoKind::cartesian2;
    if (position_dim == 3) return PseudoKind::cartesian3;
    throw std::invalid_argument("cartesian pseudo-coordinates need 2D or 3D positions");
  }
  throw std::invalid_argument("unknown pseudo-coordinate kind '" + std::string(name) + "'");
}

/// Fitted normalization for one graph. `scale` is r_max (cartesian), rho_max
/// (polar, spherical) or the maximum degree (degree1).
struct PseudoSpec {
  PseudoKind kind = PseudoKind::cartesian2;
  double scale = 0.0;
};

enum class Scaling { refit, reuse };

namespace detail {

inline void require_positions(const Graph& graph, PseudoKind kind) {
  if (kind == PseudoKind::degree1) return;
  const std::size_t need = kind == PseudoKind::polar2 || kind == PseudoKind::cartesian2 ? 2 : 3;
  if (!graph.has_positions())
    throw GeometryError("pseudo-coordinates of kind " + std::string(to_string(kind)) + " need node positions");
  if (graph.position_dim() != need)
    throw GeometryError("pseudo-coordinates of kind " + std::string(to_string(kind)) + " need " +
                        std::to_string(need) + "D positions, graph has " +
                        std::to_string(graph.position_dim()) + "D");
}

inline double fit_scale(const Graph& graph, PseudoKind kind, std::size_t edge_begin, std::size_t edge_end) {
  double scale = 0.0;
  const auto& pos = graph.positions();
  for (std::size_t e = edge_begin; e < edge_end; ++e) {
    const Edge& edge = graph.edge(e);
    switch (kind) {
      case PseudoKind::cartesian2:
      case PseudoKind::cartesian3:
        for (std::size_t a = 0; a < pos.cols(); ++a)
          scale = std::max(scale, std::abs(pos(edge.target, a) - pos(edge.origin, a)));
        break;
      case PseudoKind::polar2:
      case PseudoKind::spherical3: {
        double r2 = 0.0;
        for (std::size_t a = 0; a < pos.cols(); ++a) {
          const double delta = pos(edge.target, a) - pos(edge.origin, a);
          r2 += delta * delta;
        }
        scale = std::max(scale, std::sqrt(r2));
        break;
      }
      case PseudoKind::degree1:
        // max over v of deg(v): every node with nonzero degree is an origin.
        scale = std::max({scale, static_cast<double>(graph.degree(edge.origin)),
                          static_cast<double>(graph.degree(edge.target))});
        break;
    }
  }
  return scale;
}

inline double clamp01(double v) noexcept { return std::clamp(v, 0.0, 1.0); }

inline void apply_range(const Graph& graph, const PseudoSpec& spec, std::size_t edge_begin,
                        std::size_t edge_end, Matrix<double>& out) {
  const auto& pos = graph.positions();
  constexpr double pi = std::numbers::pi;
  for (std::size_t e = edge_begin; e < edge_end; ++e) {
    const Edge& edge = graph.edge(e);
    auto u = out.row(e);
    switch (spec.kind) {
      case PseudoKind::cartesian2:
      case PseudoKind::cartesian3:
        for (std::size_t a = 0; a < pos.cols(); ++a)
          u[a] = (pos(edge.target, a) - pos(edge.origin, a)) / (2.0 * spec.scale) + 0.5;
        break;
      case PseudoKind::polar2: {
        const double dx = pos(edge.target, 0) - pos(edge.origin, 0);
        const double dy = pos(edge.target, 1) - pos(edge.origin, 1);
        const double rho = std::hypot(dx, dy);
        u[0] = rho / spec.scale;
        u[1] = rho == 0.0 ? 0.5 : (std::atan2(dy, dx) + pi) / (2.0 * pi);
        break;
      }
      case PseudoKind::spherical3: {
        const double dx = pos(edge.target, 0) - pos(edge.origin, 0);
        const double dy = pos(edge.target, 1) - pos(edge.origin, 1);
        const double dz = pos(edge.target, 2) - pos(edge.origin, 2);
        const double rho = std::sqrt(dx * dx + dy * dy + dz * dz);
        u[0] = rho / spec.scale;
        u[1] = rho == 0.0 ? 0.5 : (std::atan2(dy, dx) + pi) / (2.0 * pi);
        u[2] = rho == 0.0 ? 0.5 : std::acos(std::clamp(dz / rho, -1.0, 1.0)) / pi;
        break;
      }
      case PseudoKind::degree1:
        u[0] = static_cast<double>(graph.degree(edge.target)) / spec.scale;
        break;
    }
    for (double& v : u) {
      // Rounding can leave values a few ulps outside the interval.
      if (v < -1e-12 || v > 1.0 + 1e-12)
        throw GeometryError("pseudo-coordinate " + std::to_string(v) + " outside [0,1]; scale not fitted to this graph");
      v = clamp01(v);
    }
  }
}

}  // namespace detail

/// Recomputes pseudo-coordinates from the current positions (or degrees).
/// With Scaling::refit the scale constant is refitted to this graph, which
/// is what pooled graphs need; Scaling::reuse keeps `spec.scale`.
inline PseudoSpec recompute_pseudo(Graph& graph, PseudoSpec spec, Scaling scaling = Scaling::refit) {
  detail::require_positions(graph, spec.kind);
  const std::size_t d = pseudo_dim(spec.kind);
  if (graph.num_edges() == 0) {
    graph.set_pseudo(Matrix<double>(0, d));
    return spec;
  }
  if (scaling == Scaling::refit) spec.scale = detail::fit_scale(graph, spec.kind, 0, graph.num_edges());
  if (!(spec.scale > 0.0))
    throw GeometryError("degenerate geometry: all edge offsets are zero, cannot normalize " +
                        std::string(to_string(spec.kind)) + " pseudo-coordinates");
  Matrix<double> pseudo(graph.num_edges(), d);
  detail::apply_range(graph, spec, 0, graph.num_edges(), pseudo);
  graph.set_pseudo(std::move(pseudo));
  return spec;
}

/// Fits the per-graph scale and fills pseudo-coordinates of the given kind.
inline PseudoSpec fit_and_apply(Graph& graph, PseudoKind kind) {
  return recompute_pseudo(graph, PseudoSpec{kind, 0.0}, Scaling::refit);
}

/// Per-example fit on a block-diagonal batch; returns one spec per example.
/// Degree normalization uses the maximum degree within each example. With
/// `allow_degenerate`, an example whose offsets are all zero (only
/// self-loops, e.g. after heavy pooling) gets scale 1 instead of an error.
inline std::vector<PseudoSpec> fit_and_apply(Batch& batch, PseudoKind kind, bool allow_degenerate = false) {
  Graph& graph = batch.graph;
  detail::require_positions(graph, kind);
  const std::size_t d = pseudo_dim(kind);
  Matrix<double> pseudo(graph.num_edges(), d);
  std::vector<PseudoSpec> specs;
  for (std::size_t k = 0; k < batch.example_count(); ++k) {
    const std::size_t eb = batch.edge_offsets[k], ee = batch.edge_offsets[k + 1];
    PseudoSpec spec{kind, 0.0};
    if (eb != ee) {
      spec.scale = detail::fit_scale(graph, kind, eb, ee);
      if (!(spec.scale > 0.0) && allow_degenerate) spec.scale = 1.0;
      if (!(spec.scale > 0.0))
        throw GeometryError("degenerate geometry in example " + std::to_string(k) +
                            ": all edge offsets are zero");
      detail::apply_range(graph, spec, eb, ee, pseudo);
    }
    specs.push_back(spec);
  }
  graph.set_pseudo(std::move(pseudo));
  return specs;
}

}  // namespace splinecnn

#endif  // SPLINECNN_PSEUDO_HPP
