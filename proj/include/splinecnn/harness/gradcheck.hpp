#ifndef SPLINECNN_HARNESS_GRADCHECK_HPP
#define SPLINECNN_HARNESS_GRADCHECK_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "splinecnn/architecture.hpp"
#include "splinecnn/graph.hpp"
#include "splinecnn/network.hpp"
#include "splinecnn/nn/activation.hpp"
#include "splinecnn/nn/dense.hpp"
#include "splinecnn/nn/loss.hpp"
#include "splinecnn/nn/pool.hpp"
#include "splinecnn/oracle.hpp"
#include "splinecnn/pseudo.hpp"
#include "splinecnn/spline_basis.hpp"
#include "splinecnn/spline_conv.hpp"

namespace splinecnn::harness {

struct GradCheckResult {
  std::string name;
  std::size_t entries = 0;
  double max_relative_error = 0.0;
  bool pass = false;
};

/// Graph with `nodes` nodes and `edges` distinct random edges (self-loops
/// allowed) and uniform random pseudo-coordinates in [0,1]^d.
inline Graph random_graph(std::size_t nodes, std::size_t edges, std::size_t d, std::mt19937_64& rng) {
  if (edges > nodes * nodes) throw std::invalid_argument("random_graph: too many edges");
  std::set<Edge> chosen;
  while (chosen.size() < edges) chosen.insert({rng() % nodes, rng() % nodes});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix<double> pseudo(edges, d);
  for (double& v : pseudo.flat()) v = unit(rng);
  return Graph(nodes, std::vector<Edge>(chosen.begin(), chosen.end()), std::move(pseudo));
}

template <class M>
void fill_uniform(M& m, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : m.flat()) v = dist(rng);
}

namespace detail {

/// Compares `analytic` against central differences of `loss` around the
/// current contents of `values` (restored afterwards).
inline GradCheckResult compare(const std::string& name, std::span<double> values, std::span<const double> analytic,
                               const std::function<double()>& loss, const oracle::FDConfig& config) {
  const std::vector<double> saved(values.begin(), values.end());
  const auto numeric = oracle::finite_diff_grad(
      [&](std::span<const double> theta) {
        std::copy(theta.begin(), theta.end(), values.begin());
        return loss();
      },
      saved, config);
  std::copy(saved.begin(), saved.end(), values.begin());
  GradCheckResult r;
  r.name = name;
  r.entries = values.size();
  r.max_relative_error = oracle::max_relative_error(analytic, numeric, config);
  r.pass = r.max_relative_error <= config.tolerance;
  return r;
}

inline double weighted_sum(const Matrix<double>& y, const Matrix<double>& r) {
  double s = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) s += y.flat()[k] * r.flat()[k];
  return s;
}

}  // namespace detail

/// SplineConv gradients (weight, root, input) for degree m on a random
/// instance: N = 12, E = 30, d = 2 with a closed second dimension,
/// M_in = 3, M_out = 4. Loss = sum(out * R) for a fixed random R.
inline std::vector<GradCheckResult> grad_check_spline_conv(int m, std::uint64_t seed,
                                                           const oracle::FDConfig& config = {}) {
  std::mt19937_64 rng(seed);
  const Graph graph = random_graph(12, 30, 2, rng);
  const KernelConfig kc(m, {4, 5}, {false, true});
  const auto plan = compute_plan<double>(graph.pseudo(), kc);
  SplineConvLayer<double> conv(kc, 3, 4, true, true);
  fill_uniform(conv.weight(), rng);
  fill_uniform(conv.root(), rng);
  Matrix<double> x(12, 3), r(12, 4);
  fill_uniform(x, rng);
  fill_uniform(r, rng);

  SplineConvContext<double> ctx;
  conv.zero_grad();
  conv.forward(graph, plan, x, &ctx);
  const Matrix<double> gx = conv.backward(ctx, r, true);
  const auto gw = conv.grad_weight();
  const auto gr = conv.grad_root();
  auto loss = [&] { return detail::weighted_sum(conv.forward(graph, plan, x), r); };
  const std::string tag = "spline_conv m=" + std::to_string(m);
  return {detail::compare(tag + " weight", conv.weight().flat(), gw.flat(), loss, config),
          detail::compare(tag + " root", conv.root().flat(), gr.flat(), loss, config),
          detail::compare(tag + " input", x.flat(), gx.flat(), loss, config)};
}

inline std::vector<GradCheckResult> grad_check_components(std::uint64_t seed, const oracle::FDConfig& config = {}) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> out;
  {
    nn::DenseLayer<double> dense(3, 4);
    fill_uniform(dense.weight(), rng);
    fill_uniform(dense.bias(), rng);
    Matrix<double> x(5, 3), r(5, 4);
    fill_uniform(x, rng);
    fill_uniform(r, rng);
    dense.zero_grad();
    const auto gx = dense.backward(x, r);
    const auto gw = dense.grad_weight();
    const auto gb = dense.grad_bias();
    auto loss = [&] { return detail::weighted_sum(dense.forward(x), r); };
    out.push_back(detail::compare("dense weight", dense.weight().flat(), gw.flat(), loss, config));
    out.push_back(detail::compare("dense bias", dense.bias().flat(), gb.flat(), loss, config));
    out.push_back(detail::compare("dense input", x.flat(), gx.flat(), loss, config));
  }
  {
    Matrix<double> x(6, 4), r(6, 4);
    fill_uniform(x, rng, -2.0, 2.0);
    fill_uniform(r, rng);
    const auto gx = nn::elu_backward(x, r);
    auto loss = [&] { return detail::weighted_sum(nn::elu(x), r); };
    out.push_back(detail::compare("elu input", x.flat(), gx.flat(), loss, config));
  }
  {
    Graph grid = build_grid_graph(4, 4, Neighborhood::full8, false);
    fit_and_apply(grid, PseudoKind::cartesian2);
    const Batch batch = single_batch(grid);
    const auto coarsening = nn::graclus_coarsen(batch, 4, seed, PseudoKind::cartesian2);
    Matrix<double> x(16, 3), r(coarsening.cluster_count, 3);
    fill_uniform(x, rng);
    fill_uniform(r, rng);
    Matrix<std::size_t> argmax;
    nn::max_pool(x, coarsening, &argmax);
    const auto gx = nn::max_pool_backward(argmax, r, 16);
    auto loss = [&] { return detail::weighted_sum(nn::max_pool(x, coarsening), r); };
    out.push_back(detail::compare("max_pool input", x.flat(), gx.flat(), loss, config));
  }
  {
    const std::vector<std::size_t> offsets{0, 3, 7, 10};
    Matrix<double> x(10, 2), r(3, 2);
    fill_uniform(x, rng);
    fill_uniform(r, rng);
    const auto gx = nn::global_avg_pool_backward(r, offsets);
    auto loss = [&] { return detail::weighted_sum(nn::global_avg_pool(x, offsets), r); };
    out.push_back(detail::compare("avg_pool input", x.flat(), gx.flat(), loss, config));
  }
  {
    Matrix<double> logits(6, 5);
    fill_uniform(logits, rng, -3.0, 3.0);
    const std::vector<int> labels{0, 4, 2, 2, 1, 3};
    const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1};
    const auto ce = nn::softmax_cross_entropy(logits, std::span<const int>(labels), std::span<const std::uint8_t>(mask));
    auto loss = [&] {
      return nn::softmax_cross_entropy(logits, std::span<const int>(labels), std::span<const std::uint8_t>(mask)).loss;
    };
    out.push_back(detail::compare("cross_entropy logits", logits.flat(), ce.grad.flat(), loss, config));
  }
  return out;
}

/// Whole networks in double precision, cross-entropy on top: every
/// parameter tensor and the input features.
inline std::vector<GradCheckResult> grad_check_networks(std::uint64_t seed, const oracle::FDConfig& config = {}) {
  std::vector<GradCheckResult> out;
  struct Case {
    const char* name;
    const char* arch;
    int degree;
    PseudoKind kind;
  };
  const Case cases[] = {
      {"net grid", "SConv((3,3),2,4) -> ELU -> MaxP(2) -> SConv((3,3),4,5) -> ELU -> FC(6) -> ELU -> FC(3)", 1,
       PseudoKind::cartesian2},
      {"net polar", "Lin(3) -> SConv((4,5),3,4) -> ELU -> MaxP(4) -> SConv((3,4),4,4) -> AvgP -> FC(3)", 2,
       PseudoKind::polar2},
      {"net cubic", "SConv((4,4),2,3) -> ELU -> Lin(3)", 3, PseudoKind::cartesian2},
  };
  std::mt19937_64 rng(seed);
  for (const Case& c : cases) {
    std::vector<Graph> graphs;
    for (int g = 0; g < 2; ++g) {
      Graph grid = build_grid_graph(4, 3, Neighborhood::full8, false);
      // Jitter positions so examples differ and no geometry is degenerate.
      Matrix<double> pos = grid.positions();
      std::uniform_real_distribution<double> jitter(-0.2, 0.2);
      for (double& v : pos.flat()) v += jitter(rng);
      grid.set_positions(std::move(pos));
      fit_and_apply(grid, c.kind);
      grid.set_features(Matrix<double>(grid.num_nodes(), 2));
      graphs.push_back(std::move(grid));
    }
    const Batch batch = batch_graphs(graphs);
    auto level = std::make_shared<const GraphLevel<double>>(batch);
    NetworkOptions options;
    options.degree = c.degree;
    options.pseudo = c.kind;
    options.seed = seed;
    Network<double> net(parse_architecture(c.arch), options, batch);
    Matrix<double> x(batch.graph.num_nodes(), 2);
    fill_uniform(x, rng);
    std::vector<int> labels;
    const std::size_t rows = net.output_is_node_level() ? batch.graph.num_nodes() : batch.example_count();
    for (std::size_t k = 0; k < rows; ++k) labels.push_back(static_cast<int>(rng() % net.output_dim()));

    net.zero_grad();
    const auto ce = nn::softmax_cross_entropy(net.forward(level, x, true), std::span<const int>(labels));
    const Matrix<double> gx = net.backward(ce.grad, true);
    auto loss = [&] { return nn::softmax_cross_entropy(net.forward(level, x, true), std::span<const int>(labels)).loss; };
    for (auto& p : net.parameters()) {
      const std::vector<double> analytic(p.grad.begin(), p.grad.end());
      out.push_back(detail::compare(std::string(c.name) + " " + p.name, p.value, analytic, loss, config));
    }
    out.push_back(detail::compare(std::string(c.name) + " input", x.flat(), gx.flat(), loss, config));
  }
  return out;
}

inline std::vector<GradCheckResult> run_grad_checks(std::uint64_t seed, const oracle::FDConfig& config = {}) {
  std::vector<GradCheckResult> out;
  for (int m = 1; m <= 3; ++m) {
    auto part = grad_check_spline_conv(m, seed + static_cast<std::uint64_t>(m), config);
    out.insert(out.end(), part.begin(), part.end());
  }
  auto components = grad_check_components(seed + 10, config);
  out.insert(out.end(), components.begin(), components.end());
  auto nets = grad_check_networks(seed + 20, config);
  out.insert(out.end(), nets.begin(), nets.end());
  return out;
}

}  // namespace splinecnn::harness

#endif  // SPLINECNN_HARNESS_GRADCHECK_HPP
