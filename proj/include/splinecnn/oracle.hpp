#ifndef SPLINECNN_ORACLE_HPP
#define SPLINECNN_ORACLE_HPP

// Reference implementations for tests. Nothing here shares code with the
// fast paths: basis functions come from the Cox-de Boor recursion on the
// cardinal B-spline, and every kernel sum runs over all K control values.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "splinecnn/graph.hpp"
#include "splinecnn/spline_basis.hpp"
#include "splinecnn/tensor.hpp"

namespace splinecnn::oracle {

struct FDConfig {
  double step = 1e-6;
  double tolerance = 1e-5;
  /// Denominator floor for relative errors, so entries whose true gradient is
  /// zero are compared on an absolute scale.
  double magnitude_floor = 1e-3;
};

/// Cardinal B-spline of degree m supported on [0, m+1].
inline double cardinal_bspline(int m, double x) {
  if (m == 0) return (x >= 0.0 && x < 1.0) ? 1.0 : 0.0;
  return (x * cardinal_bspline(m - 1, x) + (m + 1 - x) * cardinal_bspline(m - 1, x - 1.0)) / m;
}

/// Value of basis function q (0 <= q < k) of one dimension at u.
inline double basis_function(std::size_t q, double u, std::size_t k, int m, bool closed) {
  const double kk = static_cast<double>(k);
  const double qq = static_cast<double>(q);
  if (!closed) return cardinal_bspline(m, u * (kk - m) - qq + m);
  double sum = 0.0;
  const int reach = 2 * m + 4;
  for (int z = -reach; z <= reach; ++z) sum += cardinal_bspline(m, u * kk - qq + m + z * kk);
  return sum;
}

/// B_p(u) for every flat index p in [0, K), dimension 0 fastest.
inline std::vector<double> all_basis_products(std::span<const double> u, const KernelConfig& config) {
  const std::size_t kcount = config.kernel_count();
  std::vector<double> out(kcount);
  for (std::size_t p = 0; p < kcount; ++p) {
    std::size_t rest = p;
    double product = 1.0;
    for (std::size_t i = 0; i < config.dim(); ++i) {
      const std::size_t q = rest % config.kernel_size[i];
      rest /= config.kernel_size[i];
      product *= basis_function(q, u[i], config.kernel_size[i], config.degree, config.closed[i]);
    }
    out[p] = product;
  }
  return out;
}

/// Literal evaluation of the convolution: for each node, the mean over its
/// neighbors of sum_l f_l(j) * g_{l,o}(u(i,j)), with g summed over all K
/// control values, plus the optional root term.
inline Matrix<double> naive_spline_conv(const Graph& graph, const Tensor3<double>& weight, const Matrix<double>* root,
                                        const Matrix<double>& input, const KernelConfig& config, bool normalize) {
  const std::size_t kcount = config.kernel_count();
  const std::size_t in = weight.dim1(), out = weight.dim2();
  if (weight.dim0() != kcount) throw std::invalid_argument("naive_spline_conv: weight does not match kernel");
  if (input.rows() != graph.num_nodes() || input.cols() != in)
    throw std::invalid_argument("naive_spline_conv: input shape mismatch");
  if (static_cast<double>(kcount) * graph.num_edges() * in * out > 1e7)
    throw std::invalid_argument("naive_spline_conv: instance exceeds the 1e7 size guard");

  Matrix<double> result(graph.num_nodes(), out);
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
    std::vector<double> acc(out, 0.0);
    std::size_t neighbors = 0;
    for (std::size_t eidx = 0; eidx < graph.num_edges(); ++eidx) {
      const Edge& e = graph.edge(eidx);
      if (e.origin != i) continue;
      ++neighbors;
      const auto products = all_basis_products(graph.pseudo().row(eidx), config);
      for (std::size_t l = 0; l < in; ++l) {
        for (std::size_t o = 0; o < out; ++o) {
          double g = 0.0;
          for (std::size_t p = 0; p < kcount; ++p) g += weight(p, l, o) * products[p];
          acc[o] += input(e.target, l) * g;
        }
      }
    }
    for (std::size_t o = 0; o < out; ++o) {
      double v = acc[o];
      if (normalize && neighbors) v /= static_cast<double>(neighbors);
      if (root)
        for (std::size_t l = 0; l < in; ++l) v += (*root)(l, o) * input(i, l);
      result(i, o) = v;
    }
  }
  return result;
}

/// Zero-padded 2D cross-correlation (no kernel flip) of an H x W image with
/// an odd square kernel: out[y,x] = sum kernel[r+dy, r+dx] * img[y+dy, x+dx].
inline Matrix<double> dense_conv2d(const Matrix<double>& image, const Matrix<double>& kernel) {
  if (kernel.rows() != kernel.cols() || kernel.rows() % 2 == 0)
    throw std::invalid_argument("dense_conv2d: kernel must be square with odd size");
  const long r = static_cast<long>(kernel.rows() / 2);
  const long h = static_cast<long>(image.rows()), w = static_cast<long>(image.cols());
  Matrix<double> out(image.rows(), image.cols());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long dy = -r; dy <= r; ++dy) {
        for (long dx = -r; dx <= r; ++dx) {
          const long yy = y + dy, xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
          acc += kernel(static_cast<std::size_t>(dy + r), static_cast<std::size_t>(dx + r)) *
                 image(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
        }
      }
      out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
    }
  }
  return out;
}

/// Central differences (f(theta + h e_k) - f(theta - h e_k)) / 2h for every k.
inline std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss,
                                            std::vector<double> theta, const FDConfig& config = {}) {
  if (!(config.step > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  std::vector<double> grad(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double saved = theta[k];
    theta[k] = saved + config.step;
    const double plus = loss(theta);
    theta[k] = saved - config.step;
    const double minus = loss(theta);
    theta[k] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw std::domain_error("finite_diff_grad: non-finite loss at coordinate " + std::to_string(k));
    grad[k] = (plus - minus) / (2.0 * config.step);
  }
  return grad;
}

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Largest entrywise relative error between two gradients.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 const FDConfig& config = {}) {
  if (analytic.size() != numeric.size()) throw std::invalid_argument("max_relative_error: size mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k)
    worst = std::max(worst, relative_error(analytic[k], numeric[k], config.magnitude_floor));
  return worst;
}

}  // namespace splinecnn::oracle

#endif  // SPLINECNN_ORACLE_HPP
