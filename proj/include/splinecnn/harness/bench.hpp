#ifndef SPLINECNN_HARNESS_BENCH_HPP
#define SPLINECNN_HARNESS_BENCH_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "splinecnn/graph.hpp"
#include "splinecnn/harness/config.hpp"
#include "splinecnn/spline_basis.hpp"
#include "splinecnn/spline_conv.hpp"

namespace splinecnn::harness {

struct BenchRow {
  std::string sweep;       // kernel | depth | edges
  std::size_t value = 0;   // K, depth or E
  std::size_t edges = 0;
  std::size_t kernel_count = 0;
  std::size_t depth = 1;
  std::size_t repetitions = 0;
  double median = 0.0, min = 0.0, max = 0.0;  // seconds
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double kernel_variation = 0.0;  // (max - min) / min over kernel-sweep medians
  double depth_r2 = 0.0;          // least-squares fit of median time vs depth
  double edge_ratio_min = 0.0, edge_ratio_max = 0.0;  // consecutive doublings

  bool kernel_pass() const { return kernel_variation < 0.25; }
  bool depth_pass() const { return depth_r2 >= 0.98; }
  bool edge_pass() const { return edge_ratio_min >= 1.6 && edge_ratio_max <= 2.6; }
  bool pass() const { return kernel_pass() && depth_pass() && edge_pass(); }
};

/// Random graph with `edges / fanout` origins, each with `fanout` distinct
/// random targets, and uniform pseudo-coordinates in [0,1]^d.
inline Graph bench_graph(std::size_t edges, std::size_t d, std::uint64_t seed, std::size_t fanout = 10) {
  const std::size_t nodes = std::max<std::size_t>(fanout + 1, edges / fanout);
  std::mt19937_64 rng(seed);
  std::vector<Edge> list;
  list.reserve(edges);
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; list.size() < edges; ++i) {
    picked.clear();
    const std::size_t origin = i % nodes;
    while (picked.size() < fanout && list.size() + picked.size() < edges) {
      const std::size_t t = rng() % nodes;
      if (std::find(picked.begin(), picked.end(), t) == picked.end()) picked.push_back(t);
    }
    for (std::size_t t : picked) list.push_back({origin, t});
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix<double> pseudo(list.size(), d);
  for (double& v : pseudo.flat()) v = unit(rng);
  return Graph(nodes, std::move(list), std::move(pseudo));
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Coefficient of determination of the least-squares line through (x, y).
inline double linear_r2(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy * sxy / (sxx * syy);
}

namespace detail {

/// `depth` stacked layers over one graph; run() includes basis computation.
class Stack {
 public:
  Stack(const Graph& graph, const KernelConfig& config, std::size_t features, std::size_t depth,
        const BenchSettings& s, std::size_t workers, std::uint64_t seed)
      : graph_(graph), config_(config), backward_(s.backward), ctx_(depth) {
    for (std::size_t k = 0; k < depth; ++k) {
      layers_.emplace_back(config, features, features, true, true);
      layers_.back().init_weights(seed + k);
      layers_.back().set_workers(workers);
    }
    x_ = Matrix<float>(graph.num_nodes(), features);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (float& v : x_.flat()) v = dist(rng);
  }

  void run() {
    const auto plan = compute_plan<float>(graph_.pseudo(), config_);
    Matrix<float> h = x_;
    for (std::size_t k = 0; k < layers_.size(); ++k)
      h = layers_[k].forward(graph_, plan, h, backward_ ? &ctx_[k] : nullptr);
    if (backward_) {
      for (std::size_t k = layers_.size(); k-- > 0;) {
        layers_[k].zero_grad();
        h = layers_[k].backward(ctx_[k], h, k > 0);
      }
    }
  }

  BenchRow row() const {
    BenchRow r;
    r.edges = graph_.num_edges();
    r.kernel_count = config_.kernel_count();
    r.depth = layers_.size();
    return r;
  }

 private:
  const Graph& graph_;
  KernelConfig config_;
  bool backward_;
  std::vector<SplineConvLayer<float>> layers_;
  std::vector<SplineConvContext<float>> ctx_;
  Matrix<float> x_;
};

/// Times each stack `reps` times, visiting them round-robin so slow drift in
/// machine speed spreads evenly over the sweep.
inline std::vector<BenchRow> time_interleaved(std::vector<Stack>& stacks, std::size_t warmup, std::size_t reps) {
  for (std::size_t w = 0; w < warmup; ++w)
    for (auto& st : stacks) st.run();
  std::vector<std::vector<double>> samples(stacks.size());
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < stacks.size(); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      stacks[i].run();
      samples[i].push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
  }
  std::vector<BenchRow> rows;
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    BenchRow row = stacks[i].row();
    row.repetitions = reps;
    row.median = median_of(samples[i]);
    row.min = *std::min_element(samples[i].begin(), samples[i].end());
    row.max = *std::max_element(samples[i].begin(), samples[i].end());
    rows.push_back(row);
  }
  return rows;
}

}  // namespace detail

/// Kernel-size sweep (d = 3, k^3 for k in [kernel_min, kernel_max]), depth
/// sweep (1..depth_max identical layers) and edge-count sweep (E/4 .. 2E).
inline BenchReport run_bench(const BenchSettings& s, std::uint64_t seed, std::size_t workers = 1,
                             std::ostream* log = nullptr) {
  BenchReport report;
  auto note = [&](const BenchRow& r) {
    if (log)
      *log << r.sweep << " " << r.value << ": median " << r.median * 1e3 << " ms (min " << r.min * 1e3 << ", max "
           << r.max * 1e3 << ")" << std::endl;
  };

  const Graph big = bench_graph(s.edges, 3, seed);
  std::vector<detail::Stack> kernel_stacks;
  for (std::size_t k = s.kernel_min; k <= s.kernel_max; ++k)
    kernel_stacks.emplace_back(big, KernelConfig(1, {k, k, k}), s.features, 1, s, workers, seed);
  std::vector<double> kernel_medians;
  for (BenchRow& row : detail::time_interleaved(kernel_stacks, s.warmup, s.repetitions)) {
    row.sweep = "kernel";
    row.value = row.kernel_count;
    kernel_medians.push_back(row.median);
    report.rows.push_back(row);
    note(row);
  }
  const auto [kmin, kmax] = std::minmax_element(kernel_medians.begin(), kernel_medians.end());
  report.kernel_variation = (*kmax - *kmin) / *kmin;

  const Graph small = bench_graph(s.depth_edges, 3, seed + 1);
  std::vector<detail::Stack> depth_stacks;
  for (std::size_t depth = 1; depth <= s.depth_max; ++depth)
    depth_stacks.emplace_back(small, KernelConfig(1, {5, 5, 5}), s.depth_features, depth, s, workers, seed);
  std::vector<double> depths, times;
  for (BenchRow& row : detail::time_interleaved(depth_stacks, s.warmup, s.repetitions)) {
    row.sweep = "depth";
    row.value = row.depth;
    depths.push_back(static_cast<double>(row.depth));
    times.push_back(row.median);
    report.rows.push_back(row);
    note(row);
  }
  report.depth_r2 = linear_r2(depths, times);

  std::vector<Graph> edge_graphs;
  for (std::size_t e = s.edges / 4; e <= 2 * s.edges; e *= 2) edge_graphs.push_back(bench_graph(e, 3, seed + 2 + e));
  std::vector<detail::Stack> edge_stacks;
  for (const Graph& g : edge_graphs) edge_stacks.emplace_back(g, KernelConfig(1, {5, 5, 5}), s.features, 1, s, workers, seed);
  std::vector<double> edge_medians;
  for (BenchRow& row : detail::time_interleaved(edge_stacks, s.warmup, s.repetitions)) {
    row.sweep = "edges";
    row.value = row.edges;
    edge_medians.push_back(row.median);
    report.rows.push_back(row);
    note(row);
  }
  report.edge_ratio_min = 1e300;
  report.edge_ratio_max = 0.0;
  for (std::size_t k = 1; k < edge_medians.size(); ++k) {
    const double ratio = edge_medians[k] / edge_medians[k - 1];
    report.edge_ratio_min = std::min(report.edge_ratio_min, ratio);
    report.edge_ratio_max = std::max(report.edge_ratio_max, ratio);
  }
  return report;
}

inline void write_bench_csv(std::ostream& out, const BenchReport& report) {
  out << "sweep,value,edges,kernel_count,depth,repetitions,median_s,min_s,max_s\n";
  for (const auto& r : report.rows)
    out << r.sweep << ',' << r.value << ',' << r.edges << ',' << r.kernel_count << ',' << r.depth << ','
        << r.repetitions << ',' << r.median << ',' << r.min << ',' << r.max << '\n';
}

}  // namespace splinecnn::harness

#endif  // SPLINECNN_HARNESS_BENCH_HPP
