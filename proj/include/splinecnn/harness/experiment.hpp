#ifndef SPLINECNN_HARNESS_EXPERIMENT_HPP
#define SPLINECNN_HARNESS_EXPERIMENT_HPP

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "splinecnn/graph.hpp"
#include "splinecnn/harness/config.hpp"
#include "splinecnn/io.hpp"
#include "splinecnn/network.hpp"
#include "splinecnn/nn/adam.hpp"
#include "splinecnn/nn/loss.hpp"
#include "splinecnn/pseudo.hpp"

namespace splinecnn::harness {

struct EpochRecord {
  std::size_t run = 0;
  std::size_t epoch = 0;  // 0: before training (eval mode)
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double seconds = 0.0;
};

struct RunRecord {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  std::size_t test_count = 0;
  double seconds = 0.0;
};

struct MetricsReport {
  std::string experiment;
  std::string architecture;
  std::size_t parameter_count = 0;
  std::vector<EpochRecord> epochs;
  std::vector<RunRecord> runs;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation; 0 for one run

  void summarize() {
    mean_accuracy = std_accuracy = 0.0;
    if (runs.empty()) return;
    for (const auto& r : runs) mean_accuracy += r.test_accuracy;
    mean_accuracy /= static_cast<double>(runs.size());
    if (runs.size() > 1) {
      double ss = 0.0;
      for (const auto& r : runs) ss += (r.test_accuracy - mean_accuracy) * (r.test_accuracy - mean_accuracy);
      std_accuracy = std::sqrt(ss / static_cast<double>(runs.size() - 1));
    }
  }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

/// Per-epoch metrics. Holds no timing, so reruns with the same seed are
/// byte-identical.
inline void write_metrics_csv(std::ostream& out, const MetricsReport& report) {
  out << "run,epoch,train_loss,train_accuracy\n";
  for (const auto& e : report.epochs)
    out << e.run << ',' << e.epoch << ',' << detail::fmt(e.train_loss) << ',' << detail::fmt(e.train_accuracy) << '\n';
}

inline void write_results_csv(std::ostream& out, const MetricsReport& report) {
  out << "run,seed,test_count,test_accuracy\n";
  for (const auto& r : report.runs)
    out << r.run << ',' << r.seed << ',' << r.test_count << ',' << detail::fmt(r.test_accuracy) << '\n';
  out << "mean,,," << detail::fmt(report.mean_accuracy) << '\n';
  out << "std,,," << detail::fmt(report.std_accuracy) << '\n';
}

inline void write_timing_csv(std::ostream& out, const MetricsReport& report) {
  out << "run,epoch,seconds\n";
  for (const auto& e : report.epochs) out << e.run << ',' << e.epoch << ',' << detail::fmt(e.seconds) << '\n';
  for (const auto& r : report.runs) out << r.run << ",total," << detail::fmt(r.seconds) << '\n';
}

inline void write_report_text(std::ostream& out, const MetricsReport& report) {
  char line[256];
  out << "experiment:   " << report.experiment << '\n';
  out << "architecture: " << report.architecture << '\n';
  out << "parameters:   " << report.parameter_count << '\n';
  out << "runs:         " << report.runs.size() << "\n\n";
  out << " run  epoch  train_loss  train_acc   seconds\n";
  for (const auto& e : report.epochs) {
    std::snprintf(line, sizeof line, "%4zu  %5zu  %10.5f  %9.4f  %8.2f\n", e.run, e.epoch, e.train_loss,
                  e.train_accuracy, e.seconds);
    out << line;
  }
  out << "\n run        seed  test_acc   seconds\n";
  for (const auto& r : report.runs) {
    std::snprintf(line, sizeof line, "%4zu  %10llu  %8.4f  %8.2f\n", r.run, static_cast<unsigned long long>(r.seed),
                  r.test_accuracy, r.seconds);
    out << line;
  }
  std::snprintf(line, sizeof line, "\ntest accuracy: %.4f +- %.4f\n", report.mean_accuracy, report.std_accuracy);
  out << line;
}

/// Writes metrics.csv, results.csv, timing.csv and report.txt into `dir`.
inline void write_report_files(const MetricsReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("metrics.csv");
    write_metrics_csv(f, report);
  }
  {
    auto f = open("results.csv");
    write_results_csv(f, report);
  }
  {
    auto f = open("timing.csv");
    write_timing_csv(f, report);
  }
  {
    auto f = open("report.txt");
    write_report_text(f, report);
  }
}

inline NetworkOptions network_options(const ExperimentConfig& config, PseudoKind kind, std::uint64_t seed) {
  NetworkOptions o;
  o.degree = config.degree;
  o.pseudo = kind;
  o.use_root = config.root;
  o.normalize = config.normalize;
  o.seed = seed;
  o.pool_seed = config.pool_seed;
  o.workers = config.workers;
  return o;
}

inline nn::AdamOptions adam_options(const ExperimentConfig& config) {
  nn::AdamOptions o;
  o.lr = config.learning_rate;
  o.weight_decay = config.weight_decay;
  o.decay_mode = config.weight_decay_mode;
  return o;
}

// ---------------------------------------------------------------------------
// MNIST on 28x28 grid graphs
// ---------------------------------------------------------------------------

struct ImageSet {
  std::size_t rows = 0, cols = 0;
  std::vector<float> pixels;  // count * rows * cols, scaled to [0,1]
  std::vector<int> labels;
  std::size_t size() const noexcept { return labels.size(); }
};

inline ImageSet load_image_set(const std::filesystem::path& images, const std::filesystem::path& labels,
                               std::size_t count) {
  if (!std::filesystem::exists(images)) throw std::runtime_error("missing data: " + images.string());
  if (!std::filesystem::exists(labels)) throw std::runtime_error("missing data: " + labels.string());
  const IdxImages raw = load_idx_images(images, count);
  ImageSet set;
  set.rows = raw.rows;
  set.cols = raw.cols;
  set.labels = load_idx_labels(labels, count);
  if (set.labels.size() != raw.count) throw std::runtime_error("image and label counts differ");
  if (raw.count < count)
    throw std::runtime_error(images.string() + " holds " + std::to_string(raw.count) + " images, " +
                             std::to_string(count) + " requested");
  set.pixels.resize(raw.pixels.size());
  for (std::size_t k = 0; k < raw.pixels.size(); ++k) set.pixels[k] = static_cast<float>(raw.pixels[k]) / 255.0f;
  return set;
}

/// Grid graph shared by every image, with pseudo-coordinates and a one-channel
/// placeholder feature.
inline Graph grid_template(const ExperimentConfig& config, std::size_t rows, std::size_t cols) {
  Graph g = build_grid_graph(cols, rows, config.neighborhood, config.self_loops);
  fit_and_apply(g, parse_pseudo_kind(config.pseudo, 2));
  g.set_features(Matrix<double>(rows * cols, 1));
  return g;
}

/// Batched grid levels by batch size; pooled structure is cached inside.
template <class T>
class GridLevels {
 public:
  explicit GridLevels(Graph templ) : template_(std::move(templ)) {}
  const Graph& graph() const noexcept { return template_; }

  std::shared_ptr<const GraphLevel<T>> get(std::size_t batch_size) {
    auto it = levels_.find(batch_size);
    if (it == levels_.end()) {
      std::vector<Graph> copies(batch_size, template_);
      it = levels_.emplace(batch_size, std::make_shared<const GraphLevel<T>>(batch_graphs(copies))).first;
    }
    return it->second;
  }

 private:
  Graph template_;
  std::map<std::size_t, std::shared_ptr<const GraphLevel<T>>> levels_;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

template <class T>
Matrix<T> image_batch(const ImageSet& set, std::span<const std::size_t> indices) {
  const std::size_t per = set.rows * set.cols;
  Matrix<T> x(indices.size() * per, 1);
  for (std::size_t b = 0; b < indices.size(); ++b)
    std::copy_n(set.pixels.data() + indices[b] * per, per, x.data() + b * per);
  return x;
}

template <class T>
EvalResult evaluate_images(Network<T>& net, GridLevels<T>& levels, const ImageSet& set, std::size_t batch_size) {
  EvalResult r;
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  std::vector<int> labels;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    const std::size_t end = std::min(set.size(), start + batch_size);
    idx.clear();
    labels.clear();
    for (std::size_t k = start; k < end; ++k) {
      idx.push_back(k);
      labels.push_back(set.labels[k]);
    }
    const auto logits = net.forward(levels.get(idx.size()), image_batch<T>(set, idx), false);
    const auto ce = nn::softmax_cross_entropy(logits, std::span<const int>(labels));
    loss += ce.loss * static_cast<double>(ce.count);
    correct += ce.correct;
  }
  r.count = set.size();
  if (r.count) {
    r.loss = loss / static_cast<double>(r.count);
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.count);
  }
  return r;
}

inline std::uint64_t run_seed(const ExperimentConfig& config, std::size_t run) { return config.seed + run; }

inline std::ostream& null_log() {
  static std::ostream sink(nullptr);
  return sink;
}

inline MetricsReport run_mnist_grid(const ExperimentConfig& config, const std::filesystem::path& checkpoint = {},
                                    std::ostream& log = null_log()) {
  using T = float;
  const ImageSet train = load_image_set(config.resolve(config.train_images), config.resolve(config.train_labels),
                                        config.train_count);
  const ImageSet test =
      load_image_set(config.resolve(config.test_images), config.resolve(config.test_labels), config.test_count);
  GridLevels<T> levels(grid_template(config, train.rows, train.cols));
  const PseudoKind kind = parse_pseudo_kind(config.pseudo, 2);
  const Architecture arch = config.layers();

  MetricsReport report;
  report.experiment = to_string(config.kind);
  report.architecture = to_string(arch);
  for (std::size_t run = 0; run < config.runs; ++run) {
    const auto run_start = std::chrono::steady_clock::now();
    const std::uint64_t seed = run_seed(config, run);
    Network<T> net(arch, network_options(config, kind, seed), single_batch(levels.graph()));
    if (net.output_is_node_level()) throw std::invalid_argument("mnist_grid needs a graph-level output (FC or AvgP)");
    if (net.output_dim() != 10) throw std::invalid_argument("mnist_grid needs 10 outputs");
    report.parameter_count = net.parameter_count();
    nn::Adam<T> adam(adam_options(config));
    auto params = net.parameters();

    {
      const auto t0 = std::chrono::steady_clock::now();
      const auto init = evaluate_images(net, levels, train, config.batch_size);
      report.epochs.push_back({run, 0, init.loss, init.accuracy, detail::seconds_since(t0)});
      log << "run " << run << " epoch 0 loss " << init.loss << " acc " << init.accuracy << std::endl;
    }

    std::vector<std::size_t> order(train.size());
    std::vector<int> labels;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 rng(splitmix64(seed * 1000003ULL + epoch));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
      double loss = 0.0;
      std::size_t correct = 0;
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        std::span<const std::size_t> idx(order.data() + start, end - start);
        labels.clear();
        for (std::size_t k : idx) labels.push_back(train.labels[k]);
        net.zero_grad();
        const auto logits = net.forward(levels.get(idx.size()), image_batch<T>(train, idx), true);
        const auto ce = nn::softmax_cross_entropy(logits, std::span<const int>(labels));
        net.backward(ce.grad);
        adam.step(params);
        loss += ce.loss * static_cast<double>(ce.count);
        correct += ce.correct;
      }
      const double n = static_cast<double>(train.size());
      report.epochs.push_back({run, epoch, loss / n, static_cast<double>(correct) / n, detail::seconds_since(t0)});
      log << "run " << run << " epoch " << epoch << " loss " << loss / n << " acc " << correct / n << " ("
          << report.epochs.back().seconds << " s)" << std::endl;
    }
    const auto result = evaluate_images(net, levels, test, config.batch_size);
    report.runs.push_back({run, seed, result.accuracy, result.count, detail::seconds_since(run_start)});
    log << "run " << run << " test accuracy " << result.accuracy << std::endl;
    if (run == 0 && !checkpoint.empty()) {
      std::ofstream f(checkpoint, std::ios::binary);
      net.save(f);
    }
  }
  report.summarize();
  return report;
}

// ---------------------------------------------------------------------------
// Cora node classification
// ---------------------------------------------------------------------------

struct CoraTask {
  Graph graph;
  std::shared_ptr<const GraphLevel<float>> level;
  Matrix<float> features;
  std::vector<int> labels;
};

inline CoraTask load_cora_task(const ExperimentConfig& config) {
  const auto content = config.resolve(config.cora_content), cites = config.resolve(config.cora_cites);
  if (!std::filesystem::exists(content)) throw std::runtime_error("missing data: " + content.string());
  if (!std::filesystem::exists(cites)) throw std::runtime_error("missing data: " + cites.string());
  CoraTask task;
  auto data = load_cora(content, cites);
  task.graph = std::move(data.graph);
  fit_and_apply(task.graph, parse_pseudo_kind(config.pseudo, task.graph.position_dim()));
  task.features = task.graph.features().cast<float>();
  task.labels = *task.graph.labels();
  task.level = std::make_shared<const GraphLevel<float>>(single_batch(task.graph));
  return task;
}

struct CoraSplit {
  std::vector<std::uint8_t> train, test;
};

inline CoraSplit cora_split(const ExperimentConfig& config, std::size_t nodes, std::uint64_t seed) {
  const auto roles = random_split(nodes, config.train_count, config.test_count, seed);
  CoraSplit s;
  s.train.resize(nodes);
  s.test.resize(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    s.train[i] = roles[i] == SplitRole::train;
    s.test[i] = roles[i] == SplitRole::test;
  }
  return s;
}

inline MetricsReport run_cora(const ExperimentConfig& config, const std::filesystem::path& checkpoint = {},
                              std::ostream& log = null_log()) {
  using T = float;
  const CoraTask task = load_cora_task(config);
  const PseudoKind kind = parse_pseudo_kind(config.pseudo, task.graph.position_dim());
  const Architecture arch = config.layers();
  MetricsReport report;
  report.experiment = to_string(config.kind);
  report.architecture = to_string(arch);
  const std::span<const int> labels(task.labels);
  for (std::size_t run = 0; run < config.runs; ++run) {
    const auto run_start = std::chrono::steady_clock::now();
    const std::uint64_t seed = run_seed(config, run);
    const CoraSplit split = cora_split(config, task.graph.num_nodes(), seed);
    Network<T> net(arch, network_options(config, kind, seed), task.level->batch());
    if (!net.output_is_node_level()) throw std::invalid_argument("cora needs node-level outputs");
    report.parameter_count = net.parameter_count();
    nn::Adam<T> adam(adam_options(config));
    auto params = net.parameters();
    {
      const auto t0 = std::chrono::steady_clock::now();
      const auto ce = nn::softmax_cross_entropy(net.forward(task.level, task.features, false), labels,
                                                std::span<const std::uint8_t>(split.train));
      report.epochs.push_back({run, 0, ce.loss, static_cast<double>(ce.correct) / static_cast<double>(ce.count),
                               detail::seconds_since(t0)});
    }
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      net.zero_grad();
      const auto logits = net.forward(task.level, task.features, true);
      const auto ce = nn::softmax_cross_entropy(logits, labels, std::span<const std::uint8_t>(split.train));
      net.backward(ce.grad);
      adam.step(params);
      report.epochs.push_back({run, epoch, ce.loss, static_cast<double>(ce.correct) / static_cast<double>(ce.count),
                               detail::seconds_since(t0)});
    }
    const auto eval = nn::softmax_cross_entropy(net.forward(task.level, task.features, false), labels,
                                                std::span<const std::uint8_t>(split.test));
    const double acc = static_cast<double>(eval.correct) / static_cast<double>(eval.count);
    report.runs.push_back({run, seed, acc, eval.count, detail::seconds_since(run_start)});
    log << "run " << run << " seed " << seed << " final train loss " << report.epochs.back().train_loss
        << " test accuracy " << acc << " (" << report.runs.back().seconds << " s)" << std::endl;
    if (run == 0 && !checkpoint.empty()) {
      std::ofstream f(checkpoint, std::ios::binary);
      net.save(f);
    }
  }
  report.summarize();
  return report;
}

inline MetricsReport run_experiment(const ExperimentConfig& config, const std::filesystem::path& checkpoint = {},
                                    std::ostream& log = null_log()) {
  switch (config.kind) {
    case ExperimentKind::mnist_grid: return run_mnist_grid(config, checkpoint, log);
    case ExperimentKind::cora: return run_cora(config, checkpoint, log);
    default: throw std::invalid_argument("run_experiment: '" + to_string(config.kind) + "' is not a training experiment");
  }
}

/// Test accuracy of a saved checkpoint (run 0 split for Cora).
inline EvalResult evaluate_checkpoint(const ExperimentConfig& config, const std::filesystem::path& checkpoint) {
  std::ifstream in(checkpoint, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + checkpoint.string());
  const Architecture arch = config.layers();
  if (config.kind == ExperimentKind::mnist_grid) {
    const ImageSet test =
        load_image_set(config.resolve(config.test_images), config.resolve(config.test_labels), config.test_count);
    GridLevels<float> levels(grid_template(config, test.rows, test.cols));
    Network<float> net(arch, network_options(config, parse_pseudo_kind(config.pseudo, 2), config.seed),
                       single_batch(levels.graph()));
    net.load_parameters(in);
    return evaluate_images(net, levels, test, config.batch_size);
  }
  if (config.kind == ExperimentKind::cora) {
    const CoraTask task = load_cora_task(config);
    const CoraSplit split = cora_split(config, task.graph.num_nodes(), run_seed(config, 0));
    Network<float> net(arch,
                       network_options(config, parse_pseudo_kind(config.pseudo, task.graph.position_dim()), config.seed),
                       task.level->batch());
    net.load_parameters(in);
    const auto ce = nn::softmax_cross_entropy(net.forward(task.level, task.features, false),
                                              std::span<const int>(task.labels),
                                              std::span<const std::uint8_t>(split.test));
    return {ce.loss, static_cast<double>(ce.correct) / static_cast<double>(ce.count), ce.count};
  }
  throw std::invalid_argument("eval: '" + to_string(config.kind) + "' has no checkpoint");
}

}  // namespace splinecnn::harness

#endif  // SPLINECNN_HARNESS_EXPERIMENT_HPP
