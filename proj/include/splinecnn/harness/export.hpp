#ifndef SPLINECNN_HARNESS_EXPORT_HPP
#define SPLINECNN_HARNESS_EXPORT_HPP

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "splinecnn/graph.hpp"
#include "splinecnn/harness/config.hpp"
#include "splinecnn/io.hpp"
#include "splinecnn/network.hpp"
#include "splinecnn/pseudo.hpp"
#include "splinecnn/spline_basis.hpp"
#include "splinecnn/spline_conv.hpp"

namespace splinecnn::harness {

/// Grid coordinate i of r samples per dimension: i / (r - 1), or 0.5 for r = 1.
inline double grid_coordinate(std::size_t i, std::size_t resolution) {
  return resolution == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(resolution - 1);
}

/// Samples g_{l,o} on a uniform r^d grid for every (l, o). Columns
/// u_1..u_d,l,o,g; rows grouped by l, then o, with u_1 varying fastest.
template <class T>
void export_kernels(std::ostream& out, const SplineConvLayer<T>& layer, std::size_t resolution) {
  if (resolution == 0) throw std::invalid_argument("export_kernels: resolution must be positive");
  const KernelConfig& config = layer.config();
  const std::size_t d = config.dim();
  for (std::size_t a = 0; a < d; ++a) out << 'u' << '_' << (a + 1) << ',';
  out << "l,o,g\n";
  std::size_t points = 1;
  for (std::size_t a = 0; a < d; ++a) points *= resolution;
  std::vector<double> u(d);
  char buf[32];
  auto put = [&](double v) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, p - buf);
  };
  for (std::size_t l = 0; l < layer.in_features(); ++l) {
    for (std::size_t o = 0; o < layer.out_features(); ++o) {
      for (std::size_t g = 0; g < points; ++g) {
        std::size_t rest = g;
        for (std::size_t a = 0; a < d; ++a) {
          u[a] = grid_coordinate(rest % resolution, resolution);
          rest /= resolution;
          put(u[a]);
          out << ',';
        }
        out << l << ',' << o << ',';
        put(eval_kernel(layer.weight(), std::span<const double>(u), l, o, config));
        out << '\n';
      }
    }
  }
}

/// Reads a network checkpoint and exports the SConv layer at `layer_index`.
inline void export_kernels_from_checkpoint(std::istream& checkpoint, std::size_t layer_index, std::size_t resolution,
                                           std::ostream& out) {
  const auto layers = read_checkpoint_layers<float>(checkpoint);
  auto it = layers.convs.find(layer_index);
  if (it == layers.convs.end()) {
    std::string available;
    for (const auto& [k, v] : layers.convs) available += (available.empty() ? "" : ", ") + std::to_string(k);
    throw std::invalid_argument("layer " + std::to_string(layer_index) + " is not a spline convolution (SConv layers: " +
                                available + ")");
  }
  export_kernels(out, it->second, resolution);
}

// ---------------------------------------------------------------------------
// Conversion into the graph container format
// ---------------------------------------------------------------------------

/// One grid graph per image: pixel intensities in [0,1] as the single
/// feature, pixel positions, pseudo-coordinates of `pseudo` kind, and the
/// image label on every node.
inline std::vector<Graph> convert_images(const IdxImages& images, const std::vector<int>& labels,
                                         Neighborhood neighborhood, bool self_loops, const std::string& pseudo) {
  if (!labels.empty() && labels.size() != images.count) throw std::invalid_argument("convert: label count mismatch");
  Graph templ = build_grid_graph(images.cols, images.rows, neighborhood, self_loops);
  fit_and_apply(templ, parse_pseudo_kind(pseudo, 2));
  std::vector<Graph> out;
  out.reserve(images.count);
  for (std::size_t k = 0; k < images.count; ++k) {
    Graph g = templ;
    Matrix<double> x(images.rows * images.cols, 1);
    const auto px = images.image(k);
    for (std::size_t i = 0; i < px.size(); ++i) x(i, 0) = px[i] / 255.0;
    g.set_features(std::move(x));
    if (!labels.empty()) g.set_labels(std::vector<int>(g.num_nodes(), labels[k]));
    out.push_back(std::move(g));
  }
  return out;
}

/// Mesh graph with pseudo-coordinates (cartesian or spherical on 3D
/// positions) and the positions themselves as features.
inline Graph convert_mesh(Graph mesh, const std::string& pseudo) {
  fit_and_apply(mesh, parse_pseudo_kind(pseudo, mesh.position_dim()));
  mesh.set_features(mesh.positions());
  return mesh;
}

inline Graph convert_cora(CoraDataset data) {
  fit_and_apply(data.graph, PseudoKind::degree1);
  return std::move(data.graph);
}

}  // namespace splinecnn::harness

#endif  // SPLINECNN_HARNESS_EXPORT_HPP
