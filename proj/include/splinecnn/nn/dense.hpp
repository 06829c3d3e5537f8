#ifndef SPLINECNN_NN_DENSE_HPP
#define SPLINECNN_NN_DENSE_HPP

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "splinecnn/serialize.hpp"
#include "splinecnn/tensor.hpp"

namespace splinecnn::nn {

/// Affine map y = x W + b, W stored in x out.
template <class T>
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out)
      : weight_(in, out), bias_(1, out), grad_weight_(in, out), grad_bias_(1, out) {
    if (in == 0 || out == 0) throw std::invalid_argument("DenseLayer: dimensions must be positive");
  }

  std::size_t in_features() const noexcept { return weight_.rows(); }
  std::size_t out_features() const noexcept { return weight_.cols(); }

  Matrix<T>& weight() noexcept { return weight_; }
  const Matrix<T>& weight() const noexcept { return weight_; }
  Matrix<T>& bias() noexcept { return bias_; }
  const Matrix<T>& bias() const noexcept { return bias_; }
  Matrix<T>& grad_weight() noexcept { return grad_weight_; }
  Matrix<T>& grad_bias() noexcept { return grad_bias_; }

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) for weights and bias.
  void init_weights(std::uint64_t seed) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features()));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& w : weight_.flat()) w = static_cast<T>(dist(rng));
    for (T& w : bias_.flat()) w = static_cast<T>(dist(rng));
  }

  void zero_grad() {
    grad_weight_.fill(T{});
    grad_bias_.fill(T{});
  }

  Matrix<T> forward(const Matrix<T>& x) const {
    if (x.cols() != in_features())
      throw std::invalid_argument("DenseLayer::forward: input has " + std::to_string(x.cols()) + " columns, expected " +
                                  std::to_string(in_features()));
    const std::size_t out = out_features();
    Matrix<T> y(x.rows(), out);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      T* yr = y.row(r).data();
      std::copy_n(bias_.data(), out, yr);
      const T* xr = x.row(r).data();
      for (std::size_t k = 0; k < in_features(); ++k) {
        const T xv = xr[k];
        if (xv == T{}) continue;
        const T* w = weight_.row(k).data();
        for (std::size_t o = 0; o < out; ++o) yr[o] += xv * w[o];
      }
    }
    return y;
  }

  /// Accumulates parameter gradients; returns dL/dx.
  Matrix<T> backward(const Matrix<T>& x, const Matrix<T>& grad_y) {
    if (grad_y.rows() != x.rows() || grad_y.cols() != out_features())
      throw std::invalid_argument("DenseLayer::backward: gradient shape mismatch");
    const std::size_t out = out_features();
    Matrix<T> grad_x(x.rows(), in_features());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const T* g = grad_y.row(r).data();
      const T* xr = x.row(r).data();
      T* gx = grad_x.row(r).data();
      for (std::size_t o = 0; o < out; ++o) grad_bias_(0, o) += g[o];
      for (std::size_t k = 0; k < in_features(); ++k) {
        const T* w = weight_.row(k).data();
        T* gw = grad_weight_.row(k).data();
        const T xv = xr[k];
        T acc{};
        for (std::size_t o = 0; o < out; ++o) {
          acc += w[o] * g[o];
          gw[o] += xv * g[o];
        }
        gx[k] = acc;
      }
    }
    return grad_x;
  }

  void save(std::ostream& out) const {
    out << "DENSE 1\n" << in_features() << ' ' << out_features() << '\n';
    write_values(out, weight_.flat());
    write_values(out, bias_.flat());
  }

  static DenseLayer load(std::istream& in) {
    expect_token(in, "DENSE");
    if (read_value<int>(in) != 1) throw std::runtime_error("unsupported DENSE checkpoint version");
    const auto i = read_value<std::size_t>(in);
    const auto o = read_value<std::size_t>(in);
    DenseLayer layer(i, o);
    read_values(in, layer.weight_.flat());
    read_values(in, layer.bias_.flat());
    return layer;
  }

 private:
  Matrix<T> weight_, bias_, grad_weight_, grad_bias_;
};

}  // namespace splinecnn::nn

#endif  // SPLINECNN_NN_DENSE_HPP
