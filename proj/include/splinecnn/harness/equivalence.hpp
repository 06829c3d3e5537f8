#ifndef SPLINECNN_HARNESS_EQUIVALENCE_HPP
#define SPLINECNN_HARNESS_EQUIVALENCE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "splinecnn/graph.hpp"
#include "splinecnn/oracle.hpp"
#include "splinecnn/pseudo.hpp"
#include "splinecnn/spline_basis.hpp"
#include "splinecnn/spline_conv.hpp"

namespace splinecnn::harness {

// Kernel orientation. On a grid graph with reach r (full8: r = 1, full24:
// r = 2) and Cartesian pseudo-coordinates, the edge i -> j with pixel offset
// (dx, dy) = pos(j) - pos(i) has u = ((dx + r) / 2r, (dy + r) / 2r). With
// m = 1 and k = (2r+1, 2r+1) each u lands exactly on a knot, so a single
// basis product is 1 and the flat index is
//
//        p = (dx + r) + (2r + 1) * (dy + r)        (x fastest)
//
// For r = 1 (y grows downwards, like image rows):
//
//        dx:  -1  0 +1
//   dy -1      0  1  2        kernel(dy + r, dx + r) -> W[p, 0, 0]
//   dy  0      3  4  5
//   dy +1      6  7  8
//
// i.e. W[p] is the cross-correlation tap kernel(dy + r, dx + r), no flip.

inline std::size_t grid_tap_index(long dx, long dy, long reach) {
  return static_cast<std::size_t>((dx + reach) + (2 * reach + 1) * (dy + reach));
}

struct EquivalenceCase {
  std::size_t kernel = 3;  // 3 or 5
  std::size_t images = 0;
  double max_abs_error = 0.0;  // interior pixels
  double max_abs_error_all = 0.0;
  bool pass = false;
};

struct EquivalenceReport {
  std::vector<EquivalenceCase> cases;
  double seconds = 0.0;
  double tolerance = 1e-5;
  bool pass() const {
    return !cases.empty() && std::all_of(cases.begin(), cases.end(), [](const auto& c) { return c.pass; });
  }
};

/// SplineConv (m = 1, Cartesian, grid with self-loops, no normalization, no
/// root) in single precision against zero-padded dense cross-correlation.
inline EquivalenceReport run_grid_equivalence(std::size_t images, std::size_t size, std::uint64_t seed,
                                              double tolerance = 1e-5) {
  const auto start = std::chrono::steady_clock::now();
  EquivalenceReport report;
  report.tolerance = tolerance;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (const long reach : {1L, 2L}) {
    const std::size_t ks = static_cast<std::size_t>(2 * reach + 1);
    Graph grid = build_grid_graph(size, size, reach == 1 ? Neighborhood::full8 : Neighborhood::full24, true);
    fit_and_apply(grid, PseudoKind::cartesian2);
    const KernelConfig config(1, {ks, ks});
    const auto plan = compute_plan<float>(grid.pseudo(), config);
    EquivalenceCase result;
    result.kernel = ks;
    result.images = images;
    for (std::size_t n = 0; n < images; ++n) {
      Matrix<double> image(size, size), kernel(ks, ks);
      for (double& v : image.flat()) v = dist(rng);
      for (double& v : kernel.flat()) v = dist(rng);
      SplineConvLayer<float> conv(config, 1, 1, false, false);
      for (long dy = -reach; dy <= reach; ++dy)
        for (long dx = -reach; dx <= reach; ++dx)
          conv.weight()(grid_tap_index(dx, dy, reach), 0, 0) =
              static_cast<float>(kernel(static_cast<std::size_t>(dy + reach), static_cast<std::size_t>(dx + reach)));
      Matrix<float> x(size * size, 1);
      for (std::size_t i = 0; i < size * size; ++i) x(i, 0) = static_cast<float>(image(i / size, i % size));
      const Matrix<float> y = conv.forward(grid, plan, x);
      const Matrix<double> expected = oracle::dense_conv2d(image, kernel);
      for (std::size_t py = 0; py < size; ++py) {
        for (std::size_t px = 0; px < size; ++px) {
          const double err = std::abs(static_cast<double>(y(py * size + px, 0)) - expected(py, px));
          result.max_abs_error_all = std::max(result.max_abs_error_all, err);
          const bool interior = px >= static_cast<std::size_t>(reach) && py >= static_cast<std::size_t>(reach) &&
                                px + static_cast<std::size_t>(reach) < size && py + static_cast<std::size_t>(reach) < size;
          if (interior) result.max_abs_error = std::max(result.max_abs_error, err);
        }
      }
    }
    result.pass = result.max_abs_error <= tolerance;
    report.cases.push_back(result);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace splinecnn::harness

#endif  // SPLINECNN_HARNESS_EQUIVALENCE_HPP
