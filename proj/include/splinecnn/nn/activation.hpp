#ifndef SPLINECNN_NN_ACTIVATION_HPP
#define SPLINECNN_NN_ACTIVATION_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "splinecnn/tensor.hpp"

namespace splinecnn::nn {

/// y = x for x > 0, alpha (e^x - 1) otherwise.
template <class T>
Matrix<T> elu(const Matrix<T>& x, T alpha = T{1}) {
  Matrix<T> y(x.rows(), x.cols());
  auto in = x.flat();
  auto out = y.flat();
  for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] > T{} ? in[k] : alpha * std::expm1(in[k]);
  return y;
}

/// dL/dx from the forward input x.
template <class T>
Matrix<T> elu_backward(const Matrix<T>& x, const Matrix<T>& grad_y, T alpha = T{1}) {
  if (x.rows() != grad_y.rows() || x.cols() != grad_y.cols())
    throw std::invalid_argument("elu_backward: shape mismatch");
  Matrix<T> grad_x(x.rows(), x.cols());
  auto in = x.flat();
  auto g = grad_y.flat();
  auto out = grad_x.flat();
  for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] > T{} ? g[k] : g[k] * alpha * std::exp(in[k]);
  return grad_x;
}

/// Uniform double in [0, 1) from the top 53 bits; stable across platforms.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Inverted dropout. `scale` holds 0 or 1/(1-p) per entry for backward; it is
/// left empty in eval mode or when p = 0.
template <class T>
Matrix<T> dropout(const Matrix<T>& x, double p, bool training, std::mt19937_64& rng, std::vector<T>* scale = nullptr) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: probability must be in [0, 1)");
  if (scale) scale->clear();
  if (!training || p == 0.0) return x;
  Matrix<T> y(x.rows(), x.cols());
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> local;
  std::vector<T>& mask = scale ? *scale : local;
  mask.resize(x.size());
  auto in = x.flat();
  auto out = y.flat();
  for (std::size_t k = 0; k < in.size(); ++k) {
    mask[k] = uniform01(rng) < p ? T{} : keep;
    out[k] = in[k] * mask[k];
  }
  return y;
}

template <class T>
Matrix<T> dropout_backward(const std::vector<T>& scale, const Matrix<T>& grad_y) {
  if (scale.empty()) return grad_y;
  if (scale.size() != grad_y.size()) throw std::invalid_argument("dropout_backward: mask size mismatch");
  Matrix<T> grad_x(grad_y.rows(), grad_y.cols());
  auto g = grad_y.flat();
  auto out = grad_x.flat();
  for (std::size_t k = 0; k < g.size(); ++k) out[k] = g[k] * scale[k];
  return grad_x;
}

}  // namespace splinecnn::nn

#endif  // SPLINECNN_NN_ACTIVATION_HPP
