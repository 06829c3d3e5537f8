#ifndef SPLINECNN_SPLINE_CONV_HPP
#define SPLINECNN_SPLINE_CONV_HPP

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "splinecnn/graph.hpp"
#include "splinecnn/parallel.hpp"
#include "splinecnn/serialize.hpp"
#include "splinecnn/spline_basis.hpp"
#include "splinecnn/tensor.hpp"

namespace splinecnn {

/// What backward needs from a forward call. The graph and plan are borrowed
/// and must outlive the context; the input features are copied.
template <class T>
struct SplineConvContext {
  const Graph* graph = nullptr;
  const BasisPlan<T>* plan = nullptr;
  Matrix<T> input;
};

namespace detail {

template <class T>
inline void axpy(std::size_t n, T alpha, const T* __restrict x, T* __restrict y) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// Eight fixed lanes: vectorizes without reassociation flags and the
// summation order stays the same on every run.
template <class T>
inline T dot(std::size_t n, const T* __restrict x, const T* __restrict y) noexcept {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t k = 0; k < 8; ++k) acc[k] += x[i + k] * y[i + k];
  for (std::size_t k = 0; i < n; ++i, ++k) acc[k] += x[i] * y[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

/// Column indices and values of the nonzero entries of each row. Used when
/// inputs are mostly zero (bag-of-words features); visiting the nonzeros in
/// column order gives the same sums as the dense loop with zero skipping.
template <class T>
struct NonzeroRows {
  std::vector<std::size_t> begin;
  std::vector<std::uint32_t> col;
  std::vector<T> val;

  /// Empty (unused) unless at most a quarter of the entries are nonzero.
  static NonzeroRows build(const Matrix<T>& x) {
    NonzeroRows r;
    if (x.cols() < 32) return r;
    std::size_t nnz = 0;
    for (T v : x.flat()) nnz += v != T{};
    if (nnz * 4 > x.size()) return r;
    r.begin.reserve(x.rows() + 1);
    r.col.reserve(nnz);
    r.val.reserve(nnz);
    r.begin.push_back(0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto row = x.row(i);
      for (std::size_t l = 0; l < row.size(); ++l) {
        if (row[l] == T{}) continue;
        r.col.push_back(static_cast<std::uint32_t>(l));
        r.val.push_back(row[l]);
      }
      r.begin.push_back(r.col.size());
    }
    return r;
  }
  bool active() const noexcept { return !begin.empty(); }
};

}  // namespace detail

/// Spline-based convolution over a graph with pseudo-coordinates.
///
///   out[i,o] = n_i * sum_{(i,j)} sum_l in[j,l] * sum_{p active} W[P,l,o] * B
///            + sum_l root[l,o] * in[i,l]            (when use_root)
///
/// with n_i = 1/|N(i)| when normalizing (0 for isolated nodes' neighborhood
/// sum) and 1 otherwise. The root term sits outside the normalization.
template <class T>
class SplineConvLayer {
 public:
  SplineConvLayer() = default;
  SplineConvLayer(KernelConfig config, std::size_t in_features, std::size_t out_features, bool use_root = true,
                  bool normalize = true)
      : config_(std::move(config)),
        in_(in_features),
        out_(out_features),
        use_root_(use_root),
        normalize_(normalize),
        weight_(config_.kernel_count(), in_features, out_features),
        grad_weight_(config_.kernel_count(), in_features, out_features),
        root_(in_features, out_features),
        grad_root_(in_features, out_features) {
    config_.validate();
    if (in_ == 0 || out_ == 0) throw std::invalid_argument("SplineConvLayer: feature counts must be positive");
  }

  const KernelConfig& config() const noexcept { return config_; }
  std::size_t in_features() const noexcept { return in_; }
  std::size_t out_features() const noexcept { return out_; }
  bool use_root() const noexcept { return use_root_; }
  bool normalize() const noexcept { return normalize_; }

  Tensor3<T>& weight() noexcept { return weight_; }
  const Tensor3<T>& weight() const noexcept { return weight_; }
  Matrix<T>& root() noexcept { return root_; }
  const Matrix<T>& root() const noexcept { return root_; }
  Tensor3<T>& grad_weight() noexcept { return grad_weight_; }
  const Tensor3<T>& grad_weight() const noexcept { return grad_weight_; }
  Matrix<T>& grad_root() noexcept { return grad_root_; }
  const Matrix<T>& grad_root() const noexcept { return grad_root_; }

  /// Worker threads for forward/backward. Results are deterministic for a
  /// fixed worker count.
  void set_workers(std::size_t workers) noexcept { workers_ = std::max<std::size_t>(1, workers); }
  std::size_t workers() const noexcept { return workers_; }

  void zero_grad() {
    grad_weight_.fill(T{});
    grad_root_.fill(T{});
  }

  /// Uniform(-b, b) with b = (M_in * s)^(-1/2) for both W and the root map.
  void init_weights(std::uint64_t seed) {
    const double bound = init_bound();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& w : weight_.flat()) w = static_cast<T>(dist(rng));
    for (T& w : root_.flat()) w = static_cast<T>(dist(rng));
  }

  double init_bound() const noexcept {
    return 1.0 / std::sqrt(static_cast<double>(in_ * config_.support()));
  }

  /// Gather by edge target, edge-parallel weighting, segmented scatter-add by
  /// edge origin. Fills `ctx` for a later backward when given.
  Matrix<T> forward(const Graph& graph, const BasisPlan<T>& plan, const Matrix<T>& input,
                    SplineConvContext<T>* ctx = nullptr) const {
    check_shapes(graph, plan, input);
    const std::size_t s = plan.support;
    Matrix<T> output(graph.num_nodes(), out_);
    const auto bounds = balanced_node_ranges(graph.segments(), workers_);
    const auto nz = detail::NonzeroRows<T>::build(input);
    run_ranges(bounds, [&](std::size_t, std::size_t node_begin, std::size_t node_end) {
      std::vector<T> edge_out(out_);
      for (std::size_t i = node_begin; i < node_end; ++i) {
        T* out_row = output.row(i).data();
        const std::size_t eb = graph.segment_begin(i), ee = graph.segment_begin(i + 1);
        for (std::size_t e = eb; e < ee; ++e) {
          const T* x = input.row(graph.edge(e).target).data();
          const T* basis = plan.basis_row(e);
          const std::uint32_t* idx = plan.index_row(e);
          std::fill(edge_out.begin(), edge_out.end(), T{});
          const std::size_t j = graph.edge(e).target;
          for (std::size_t p = 0; p < s; ++p) {
            const T b = basis[p];
            if (b == T{}) continue;
            const T* w = weight_.slab(idx[p]);
            if (nz.active()) {
              for (std::size_t k = nz.begin[j]; k < nz.begin[j + 1]; ++k) {
                const T c = b * nz.val[k];
                if (c == T{}) continue;
                detail::axpy(out_, c, w + std::size_t{nz.col[k]} * out_, edge_out.data());
              }
              continue;
            }
            for (std::size_t l = 0; l < in_; ++l) {
              const T c = b * x[l];
              if (c == T{}) continue;
              detail::axpy(out_, c, w + l * out_, edge_out.data());
            }
          }
          detail::axpy(out_, T{1}, edge_out.data(), out_row);
        }
        if (normalize_ && ee > eb) {
          const T scale = T{1} / static_cast<T>(ee - eb);
          for (std::size_t o = 0; o < out_; ++o) out_row[o] *= scale;
        }
        if (use_root_) {
          const T* x = input.row(i).data();
          for (std::size_t l = 0; l < in_; ++l) {
            if (x[l] == T{}) continue;
            detail::axpy(out_, x[l], root_.row(l).data(), out_row);
          }
        }
      }
    });
    if (ctx) {
      ctx->graph = &graph;
      ctx->plan = &plan;
      ctx->input = input;
    }
    return output;
  }

  /// Accumulates grad_weight and grad_root and returns d(loss)/d(input).
  /// Pseudo-coordinates receive no gradient. With `need_input_grad` false the
  /// returned matrix is empty.
  Matrix<T> backward(const SplineConvContext<T>& ctx, const Matrix<T>& grad_output, bool need_input_grad = true) {
    if (!ctx.graph || !ctx.plan) throw std::logic_error("SplineConvLayer::backward called without forward context");
    const Graph& graph = *ctx.graph;
    const BasisPlan<T>& plan = *ctx.plan;
    const Matrix<T>& input = ctx.input;
    if (grad_output.rows() != graph.num_nodes() || grad_output.cols() != out_)
      throw std::invalid_argument("SplineConvLayer::backward: gradient shape mismatch");
    const std::size_t s = plan.support;
    const auto bounds = balanced_node_ranges(graph.segments(), workers_);
    const std::size_t workers = bounds.size() - 1;

    Matrix<T> grad_input(need_input_grad ? graph.num_nodes() : 0, in_);
    // Worker 0 accumulates in place; other workers get private buffers that
    // are reduced in worker order afterwards.
    std::vector<Tensor3<T>> weight_buffers(workers > 1 ? workers - 1 : 0);
    std::vector<Matrix<T>> input_buffers(workers > 1 && need_input_grad ? workers - 1 : 0);
    for (auto& buf : weight_buffers) buf = Tensor3<T>(weight_.dim0(), in_, out_);
    for (auto& buf : input_buffers) buf = Matrix<T>(graph.num_nodes(), in_);

    const auto nz = need_input_grad ? detail::NonzeroRows<T>{} : detail::NonzeroRows<T>::build(input);
    run_ranges(bounds, [&](std::size_t w, std::size_t node_begin, std::size_t node_end) {
      Tensor3<T>& gw = w == 0 ? grad_weight_ : weight_buffers[w - 1];
      Matrix<T>* gx = need_input_grad ? (w == 0 ? &grad_input : &input_buffers[w - 1]) : nullptr;
      std::vector<T> g(out_);
      for (std::size_t i = node_begin; i < node_end; ++i) {
        const std::size_t eb = graph.segment_begin(i), ee = graph.segment_begin(i + 1);
        if (ee == eb) continue;
        const T scale = normalize_ ? T{1} / static_cast<T>(ee - eb) : T{1};
        for (std::size_t o = 0; o < out_; ++o) g[o] = scale * grad_output(i, o);
        for (std::size_t e = eb; e < ee; ++e) {
          const std::size_t j = graph.edge(e).target;
          const T* x = input.row(j).data();
          T* dx = gx ? gx->row(j).data() : nullptr;
          const T* basis = plan.basis_row(e);
          const std::uint32_t* idx = plan.index_row(e);
          for (std::size_t p = 0; p < s; ++p) {
            const T b = basis[p];
            if (b == T{}) continue;
            const T* wslab = weight_.slab(idx[p]);
            T* gslab = gw.slab(idx[p]);
            if (nz.active()) {
              for (std::size_t k = nz.begin[j]; k < nz.begin[j + 1]; ++k) {
                const T c = b * nz.val[k];
                if (c != T{}) detail::axpy(out_, c, g.data(), gslab + std::size_t{nz.col[k]} * out_);
              }
              continue;
            }
            for (std::size_t l = 0; l < in_; ++l) {
              const T c = b * x[l];
              if (c != T{}) detail::axpy(out_, c, g.data(), gslab + l * out_);
              if (dx) dx[l] += b * detail::dot(out_, wslab + l * out_, g.data());
            }
          }
        }
      }
    });
    for (const auto& buf : weight_buffers) {
      T* dst = grad_weight_.data();
      const T* src = buf.data();
      for (std::size_t k = 0; k < buf.size(); ++k) dst[k] += src[k];
    }
    for (const auto& buf : input_buffers) {
      T* dst = grad_input.data();
      const T* src = buf.data();
      for (std::size_t k = 0; k < buf.size(); ++k) dst[k] += src[k];
    }

    if (use_root_) {
      for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
        const T* x = input.row(i).data();
        const T* go = grad_output.row(i).data();
        for (std::size_t l = 0; l < in_; ++l) {
          if (x[l] != T{}) detail::axpy(out_, x[l], go, grad_root_.row(l).data());
          if (need_input_grad) grad_input(i, l) += detail::dot(out_, root_.row(l).data(), go);
        }
      }
    }
    return grad_input;
  }

  /// Text checkpoint block:
  ///   SPLINECONV 1
  ///   <m> <d> <k_1..k_d> <closed_1..closed_d> <M_in> <M_out> <use_root> <normalize>
  ///   <K*M_in*M_out weights> then <M_in*M_out root weights>, one per line
  void save(std::ostream& out) const {
    out << "SPLINECONV 1\n" << config_.degree << ' ' << config_.dim();
    for (std::size_t k : config_.kernel_size) out << ' ' << k;
    for (bool c : config_.closed) out << ' ' << (c ? 1 : 0);
    out << ' ' << in_ << ' ' << out_ << ' ' << (use_root_ ? 1 : 0) << ' ' << (normalize_ ? 1 : 0) << '\n';
    write_values(out, weight_.flat());
    write_values(out, root_.flat());
  }

  static SplineConvLayer load(std::istream& in) {
    expect_token(in, "SPLINECONV");
    if (read_value<int>(in) != 1) throw std::runtime_error("unsupported SPLINECONV checkpoint version");
    const int m = read_value<int>(in);
    const auto d = read_value<std::size_t>(in);
    std::vector<std::size_t> k(d);
    std::vector<bool> closed(d);
    for (auto& v : k) v = read_value<std::size_t>(in);
    for (std::size_t i = 0; i < d; ++i) closed[i] = read_value<int>(in) != 0;
    const auto mi = read_value<std::size_t>(in);
    const auto mo = read_value<std::size_t>(in);
    const bool root = read_value<int>(in) != 0;
    const bool norm = read_value<int>(in) != 0;
    SplineConvLayer layer(KernelConfig(m, std::move(k), std::move(closed)), mi, mo, root, norm);
    read_values(in, layer.weight_.flat());
    read_values(in, layer.root_.flat());
    return layer;
  }

 private:
  void check_shapes(const Graph& graph, const BasisPlan<T>& plan, const Matrix<T>& input) const {
    if (input.rows() != graph.num_nodes() || input.cols() != in_)
      throw std::invalid_argument("SplineConvLayer::forward: input is " + std::to_string(input.rows()) + "x" +
                                  std::to_string(input.cols()) + ", expected " + std::to_string(graph.num_nodes()) +
                                  "x" + std::to_string(in_));
    if (plan.edges != graph.num_edges())
      throw std::invalid_argument("SplineConvLayer::forward: plan has " + std::to_string(plan.edges) +
                                  " edges, graph has " + std::to_string(graph.num_edges()));
    if (graph.num_edges() && (plan.support != config_.support() || plan.kernel_count != config_.kernel_count()))
      throw std::invalid_argument("SplineConvLayer::forward: plan computed for a different kernel configuration");
  }

  KernelConfig config_;
  std::size_t in_ = 0, out_ = 0;
  bool use_root_ = true, normalize_ = true;
  std::size_t workers_ = 1;
  Tensor3<T> weight_, grad_weight_;
  Matrix<T> root_, grad_root_;
};

}  // namespace splinecnn

#endif  // SPLINECNN_SPLINE_CONV_HPP
