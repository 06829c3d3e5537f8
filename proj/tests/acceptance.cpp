// Acceptance run: one PASS/FAIL line per criterion (also written to
// acceptance.txt in the working directory), nonzero exit if any fails.
//   acceptance [--only AC6[,AC7...]]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "splinecnn/harness/bench.hpp"
#include "splinecnn/harness/config.hpp"
#include "splinecnn/harness/equivalence.hpp"
#include "splinecnn/harness/experiment.hpp"
#include "splinecnn/harness/gradcheck.hpp"
#include "splinecnn/oracle.hpp"
#include "splinecnn/spline_basis.hpp"
#include "splinecnn/spline_conv.hpp"

using namespace splinecnn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

Outcome ac1_equivalence() {
  const auto report = harness::run_grid_equivalence(10, 8, 1);
  std::string detail;
  for (const auto& c : report.cases)
    detail += std::to_string(c.kernel) + "x" + std::to_string(c.kernel) + "_max_error=" + num(c.max_abs_error) + " ";
  detail += "seconds=" + num(report.seconds);
  return {report.pass() && report.cases.size() == 2 && report.seconds < 5.0, detail};
}

Outcome ac2_partition_of_unity() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  bool support_ok = true;
  std::size_t configs = 0;
  for (int m = 1; m <= 3; ++m) {
    for (std::size_t d = 1; d <= 3; ++d) {
      // all open, all closed, and alternating
      for (int mix = 0; mix < 3; ++mix) {
        std::vector<bool> closed(d);
        for (std::size_t a = 0; a < d; ++a) closed[a] = mix == 1 || (mix == 2 && a % 2 == 1);
        std::vector<std::size_t> k(d);
        for (std::size_t a = 0; a < d; ++a) k[a] = static_cast<std::size_t>(m) + 2 + a;
        const KernelConfig config(m, k, closed);
        Matrix<double> u(10000, d);
        for (double& v : u.flat()) v = unit(rng);
        const auto plan = compute_plan<double>(u, config);
        std::size_t expected = 1;
        for (std::size_t a = 0; a < d; ++a) expected *= static_cast<std::size_t>(m + 1);
        support_ok &= plan.support == expected;
        for (std::size_t e = 0; e < plan.edges; ++e) {
          double sum = 0.0;
          std::size_t nonzero = 0;
          for (std::size_t q = 0; q < plan.support; ++q) {
            sum += plan.basis_row(e)[q];
            nonzero += plan.basis_row(e)[q] != 0.0;
          }
          worst = std::max(worst, std::abs(sum - 1.0));
          support_ok &= nonzero == expected;
        }
        ++configs;
      }
    }
  }
  return {worst <= 1e-6 && support_ok,
          "configs=" + std::to_string(configs) + " max_deviation=" + num(worst) +
              " support=" + (support_ok ? "exact" : "wrong")};
}

Outcome ac3_gradients() {
  const auto results = harness::run_grad_checks(1);
  double worst = 0.0;
  std::string failed;
  for (const auto& r : results) {
    worst = std::max(worst, r.max_relative_error);
    if (!r.pass) failed += " " + r.name;
  }
  return {failed.empty() && !results.empty(),
          "checks=" + std::to_string(results.size()) + " max_relative_error=" + num(worst) +
              (failed.empty() ? "" : " failed:" + failed)};
}

Outcome ac4_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::size_t instances = 0;
  double worst = 0.0;
  for (int m = 1; m <= 3; ++m) {
    for (int n = 0; n < 50; ++n) {
      const std::size_t d = 1 + static_cast<std::size_t>(n % 3);
      const std::size_t nodes = 2 + rng() % 10;
      const std::size_t edges = std::min<std::size_t>(nodes * nodes, 1 + rng() % 24);
      const Graph g = harness::random_graph(nodes, edges, d, rng);
      std::vector<std::size_t> k(d);
      std::vector<bool> closed(d);
      for (std::size_t a = 0; a < d; ++a) {
        closed[a] = rng() % 2;
        k[a] = static_cast<std::size_t>(m + 1) + rng() % 3;
      }
      const KernelConfig config(m, k, closed);
      const std::size_t in = 1 + rng() % 4, out = 1 + rng() % 4;
      const bool root = rng() % 2, normalize = rng() % 2;
      SplineConvLayer<double> conv(config, in, out, root, normalize);
      for (double& w : conv.weight().flat()) w = val(rng);
      for (double& w : conv.root().flat()) w = val(rng);
      Matrix<double> x(nodes, in);
      for (double& v : x.flat()) v = val(rng);
      const auto fast = conv.forward(g, compute_plan<double>(g.pseudo(), config), x);
      const auto slow = oracle::naive_spline_conv(g, conv.weight(), root ? &conv.root() : nullptr, x, config, normalize);
      for (std::size_t i = 0; i < fast.size(); ++i) worst = std::max(worst, std::abs(fast.flat()[i] - slow.flat()[i]));
      ++instances;
    }
  }
  return {instances >= 100 && worst <= 1e-6, "instances=" + std::to_string(instances) + " max_abs_diff=" + num(worst)};
}

Outcome ac5_bench() {
  harness::BenchSettings s;
  s.edges = 100000;
  s.features = 32;
  s.kernel_min = 3;
  s.kernel_max = 8;
  s.depth_max = 16;
  const auto r = harness::run_bench(s, 1, 1);
  return {r.kernel_pass() && r.depth_pass(),
          "kernel_variation=" + num(r.kernel_variation) + " depth_r2=" + num(r.depth_r2) +
              " edge_ratio=[" + num(r.edge_ratio_min) + "," + num(r.edge_ratio_max) + "]"};
}

Outcome ac6_mnist() {
  const auto config = harness::load_config(fs::path(SPLINECNN_CONFIG_DIR) / "mnist_grid.ini");
  const auto start = std::chrono::steady_clock::now();
  const auto report = harness::run_experiment(config);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {report.mean_accuracy >= 0.90 && seconds <= 600.0,
          "test_accuracy=" + num(report.mean_accuracy) + " train=" + std::to_string(config.train_count) +
              " test=" + std::to_string(config.test_count) + " epochs=" + std::to_string(config.epochs) +
              " seconds=" + num(seconds)};
}

Outcome ac7_cora() {
  const auto config = harness::load_config(fs::path(SPLINECNN_CONFIG_DIR) / "cora.ini");
  const auto report = harness::run_experiment(config);
  double slowest = 0.0;
  for (const auto& r : report.runs) slowest = std::max(slowest, r.seconds);
  return {report.runs.size() == 10 && report.mean_accuracy >= 0.85 && slowest <= 120.0,
          "runs=" + std::to_string(report.runs.size()) + " mean_accuracy=" + num(report.mean_accuracy) +
              " std=" + num(report.std_accuracy) + " max_run_seconds=" + num(slowest)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Outcome ac8_determinism() {
  const fs::path base = fs::current_path() / "acceptance_determinism";
  fs::remove_all(base);
  const std::string config = (fs::path(SPLINECNN_CONFIG_DIR) / "cora_determinism.ini").string();
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("\"") + SPLINECNN_CLI + "\" train --config \"" + config +
                            "\" --seed 5 --deterministic --out \"" + (base / run).string() + "\" >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, std::string("train run ") + run + " failed: " + cmd};
  }
  bool same = true;
  std::string detail;
  for (const char* f : {"metrics.csv", "results.csv"}) {
    const std::string a = slurp(base / "a" / f), b = slurp(base / "b" / f);
    const bool eq = !a.empty() && a == b;
    same &= eq;
    detail += std::string(f) + "=" + (eq ? "identical" : "differs") + "(" + std::to_string(a.size()) + "B) ";
  }
  return {same, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::istringstream list(argv[++i]);
      for (std::string id; std::getline(list, id, ',');) only.insert(id);
    } else {
      std::cerr << "usage: acceptance [--only AC1,AC2,...]\n";
      return 2;
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"AC1", ac1_equivalence}, {"AC2", ac2_partition_of_unity}, {"AC3", ac3_gradients}, {"AC4", ac4_oracle},
      {"AC5", ac5_bench},       {"AC6", ac6_mnist},              {"AC7", ac7_cora},      {"AC8", ac8_determinism}};
  std::ofstream record("acceptance.txt");
  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    const std::string line = std::string(o.pass ? "PASS " : "FAIL ") + id + " " + o.detail;
    std::cout << line << std::endl;
    record << line << std::endl;
  }
  return failures ? 1 : 0;
}
