#ifndef SPLINECNN_SPLINE_BASIS_HPP
#define SPLINECNN_SPLINE_BASIS_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "splinecnn/error.hpp"
#include "splinecnn/tensor.hpp"

namespace splinecnn {

/// Spline degree m, kernel size k_i per dimension and the open/closed flag per
/// dimension. Pseudo-coordinates are expected in [0,1]^d, which is mapped onto
/// the interval where the basis forms a partition of unity.
struct KernelConfig {
  int degree = 1;
  std::vector<std::size_t> kernel_size;
  std::vector<bool> closed;

  KernelConfig() = default;
  KernelConfig(int m, std::vector<std::size_t> k, std::vector<bool> is_closed = {})
      : degree(m), kernel_size(std::move(k)), closed(std::move(is_closed)) {
    if (closed.empty()) closed.assign(kernel_size.size(), false);
    validate();
  }

  std::size_t dim() const noexcept { return kernel_size.size(); }

  /// K = prod k_i, the number of control values per (input, output) pair.
  std::size_t kernel_count() const noexcept {
    std::size_t k = 1;
    for (std::size_t ki : kernel_size) k *= ki;
    return k;
  }

  /// s = (m+1)^d, the number of nonzero basis products per pseudo-coordinate.
  std::size_t support() const noexcept {
    std::size_t s = 1;
    for (std::size_t i = 0; i < dim(); ++i) s *= static_cast<std::size_t>(degree + 1);
    return s;
  }

  void validate() const {
    if (degree < 1 || degree > 3)
      throw ConfigError("spline degree must be 1, 2 or 3, got " + std::to_string(degree));
    if (kernel_size.empty()) throw ConfigError("kernel size needs at least one dimension");
    if (closed.size() != kernel_size.size()) throw ConfigError("closed flags must match kernel dimensions");
    for (std::size_t i = 0; i < dim(); ++i) {
      const std::size_t minimum = closed[i] ? 1 : static_cast<std::size_t>(degree + 1);
      if (kernel_size[i] < minimum)
        throw ConfigError("kernel size " + std::to_string(kernel_size[i]) + " in dimension " +
                          std::to_string(i) + " is below " + std::to_string(minimum) + " for degree " +
                          std::to_string(degree) + (closed[i] ? " (closed)" : " (open)"));
    }
  }

  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
  friend auto operator<=>(const KernelConfig& a, const KernelConfig& b) {
    if (auto c = a.degree <=> b.degree; c != 0) return c;
    if (auto c = a.kernel_size <=> b.kernel_size; c != 0) return c;
    return a.closed <=> b.closed;
  }
};

/// Active indices and values of one 1D basis at a point (m+1 entries used).
struct Basis1D {
  std::array<std::size_t, 4> index{};
  std::array<double, 4> value{};
};

/// Uniform B-spline piece polynomials at local parameter t in [0,1]. Entry r
/// belongs to the basis function b+r of the segment starting at b.
inline std::array<double, 4> spline_pieces(int degree, double t) noexcept {
  const double s = 1.0 - t;
  switch (degree) {
    case 1: return {s, t, 0.0, 0.0};
    case 2: return {0.5 * s * s, 0.5 * (-2.0 * t * t + 2.0 * t + 1.0), 0.5 * t * t, 0.0};
    default:
      return {s * s * s / 6.0, (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
              (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0, t * t * t / 6.0};
  }
}

/// Evaluates the m+1 nonzero basis functions of a k-sized basis at u.
///
/// Open dimensions scale u onto k-m segments and clamp u = 1 into the last
/// one; closed dimensions scale onto k segments and wrap indices modulo k.
inline Basis1D basis_1d(double u, std::size_t k, int degree, bool closed) {
  if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("basis_1d: u = " + std::to_string(u) + " outside [0,1]");
  if (degree < 1 || degree > 3) throw ConfigError("basis_1d: degree must be 1, 2 or 3");
  Basis1D out;
  const auto m = static_cast<std::size_t>(degree);
  std::size_t b = 0;
  double t = 0.0;
  if (closed) {
    if (k < 1) throw ConfigError("basis_1d: closed kernel size must be at least 1");
    const double v = u * static_cast<double>(k);
    const double fl = std::floor(v);
    t = v - fl;
    b = static_cast<std::size_t>(fl) % k;
  } else {
    if (k < m + 1) throw ConfigError("basis_1d: open kernel size " + std::to_string(k) + " below degree + 1");
    const double v = u * static_cast<double>(k - m);
    const auto fl = static_cast<std::size_t>(std::floor(v));
    b = std::min(fl, k - m - 1);
    t = v - static_cast<double>(b);
  }
  const auto pieces = spline_pieces(degree, t);
  for (std::size_t r = 0; r <= m; ++r) {
    out.index[r] = closed ? (b + r) % k : b + r;
    out.value[r] = pieces[r];
  }
  return out;
}

/// Per-edge basis products B and flat weight indices P, both E x s. Row e
/// lists the s control values that influence edge e.
template <class T>
struct BasisPlan {
  std::size_t edges = 0;
  std::size_t support = 0;
  std::size_t kernel_count = 0;
  std::vector<T> basis;               // B, row-major E x s
  std::vector<std::uint32_t> index;   // P, row-major E x s

  const T* basis_row(std::size_t e) const noexcept { return basis.data() + e * support; }
  const std::uint32_t* index_row(std::size_t e) const noexcept { return index.data() + e * support; }
};

namespace detail {

/// Tensor product of per-dimension bases; dimension 0 varies fastest both in
/// the flat weight index and in the order of the s entries.
template <class Sink>
void tensor_product(const KernelConfig& config, const double* u, Sink&& sink) {
  const std::size_t d = config.dim();
  const auto m1 = static_cast<std::size_t>(config.degree + 1);
  std::array<Basis1D, 8> per_dim{};
  if (d > per_dim.size()) throw ConfigError("at most 8 pseudo-coordinate dimensions are supported");
  for (std::size_t i = 0; i < d; ++i) per_dim[i] = basis_1d(u[i], config.kernel_size[i], config.degree, config.closed[i]);
  const std::size_t s = config.support();
  for (std::size_t q = 0; q < s; ++q) {
    std::size_t rest = q, flat = 0, stride = 1;
    double product = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t r = rest % m1;
      rest /= m1;
      product *= per_dim[i].value[r];
      flat += per_dim[i].index[r] * stride;
      stride *= config.kernel_size[i];
    }
    sink(q, flat, product);
  }
}

}  // namespace detail

/// Computes B and P for every row of an E x d pseudo-coordinate matrix.
template <class T>
BasisPlan<T> compute_plan(const Matrix<double>& pseudo, const KernelConfig& config) {
  config.validate();
  if (pseudo.cols() != config.dim() && !(pseudo.rows() == 0))
    throw std::invalid_argument("compute_plan: pseudo dimension " + std::to_string(pseudo.cols()) +
                                " does not match kernel dimension " + std::to_string(config.dim()));
  BasisPlan<T> plan;
  plan.edges = pseudo.rows();
  plan.support = config.support();
  plan.kernel_count = config.kernel_count();
  if (plan.kernel_count > UINT32_MAX) throw ConfigError("kernel too large for 32-bit indices");
  plan.basis.resize(plan.edges * plan.support);
  plan.index.resize(plan.edges * plan.support);
  for (std::size_t e = 0; e < plan.edges; ++e) {
    T* b = plan.basis.data() + e * plan.support;
    std::uint32_t* p = plan.index.data() + e * plan.support;
    try {
      detail::tensor_product(config, pseudo.row(e).data(), [&](std::size_t q, std::size_t flat, double value) {
        b[q] = static_cast<T>(value);
        p[q] = static_cast<std::uint32_t>(flat);
      });
    } catch (const std::invalid_argument& err) {
      throw std::invalid_argument("compute_plan: edge " + std::to_string(e) + ": " + err.what());
    }
  }
  return plan;
}

/// Concatenates plans in the edge dimension (mini-batch composition).
template <class T>
BasisPlan<T> concat_plans(std::span<const BasisPlan<T>> plans) {
  BasisPlan<T> out;
  if (plans.empty()) return out;
  out.support = plans.front().support;
  out.kernel_count = plans.front().kernel_count;
  for (const auto& p : plans) {
    if (p.support != out.support || p.kernel_count != out.kernel_count)
      throw std::invalid_argument("concat_plans: plans were computed for different kernels");
    out.edges += p.edges;
    out.basis.insert(out.basis.end(), p.basis.begin(), p.basis.end());
    out.index.insert(out.index.end(), p.index.begin(), p.index.end());
  }
  return out;
}

/// g_{l,o}(u) = sum_p W[p, l, o] * B_p(u), evaluated through the s active
/// products only.
template <class T>
double eval_kernel(const Tensor3<T>& weights, std::span<const double> u, std::size_t l, std::size_t o,
                   const KernelConfig& config) {
  if (u.size() != config.dim()) throw std::invalid_argument("eval_kernel: u has wrong dimension");
  if (weights.dim0() != config.kernel_count()) throw std::invalid_argument("eval_kernel: weight tensor does not match kernel");
  if (l >= weights.dim1() || o >= weights.dim2()) throw std::out_of_range("eval_kernel: feature index out of range");
  double g = 0.0;
  detail::tensor_product(config, u.data(), [&](std::size_t, std::size_t flat, double value) {
    g += static_cast<double>(weights(flat, l, o)) * value;
  });
  return g;
}

}  // namespace splinecnn

#endif  // SPLINECNN_SPLINE_BASIS_HPP
