// splinecnn: experiment driver.
//
//   splinecnn train          --config <ini> [--seed n] [--deterministic] [--out dir]
//   splinecnn eval           --config <ini> --checkpoint <file>
//   splinecnn equiv-check    [--config <ini>] [--seed n]
//   splinecnn grad-check     [--seed n]
//   splinecnn bench          [--config <ini>] [--seed n] [--out dir]
//   splinecnn export-kernels --checkpoint <file> --layer k --resolution r [--out csv]
//   splinecnn convert        --kind image|mesh|cora ... --output <file>
//
// Every command ends with one machine-readable line on stdout:
//   RESULT PASS <command> key=value ...
//   RESULT FAIL <command> reason="..."
// and exits 0 only on PASS.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "splinecnn/harness/bench.hpp"
#include "splinecnn/harness/config.hpp"
#include "splinecnn/harness/equivalence.hpp"
#include "splinecnn/harness/experiment.hpp"
#include "splinecnn/harness/export.hpp"
#include "splinecnn/harness/gradcheck.hpp"
#include "splinecnn/io.hpp"

namespace fs = std::filesystem;
using namespace splinecnn;

namespace {

std::string quote(std::string s) {
  for (char& c : s)
    if (c == '"' || c == '\n') c = '\'';
  return "\"" + s + "\"";
}

int pass(const std::string& command, const std::string& details) {
  std::cout << "RESULT PASS " << command << (details.empty() ? "" : " " + details) << std::endl;
  return 0;
}

int fail(const std::string& command, const std::string& reason) {
  std::cout << "RESULT FAIL " << command << " reason=" << quote(reason) << std::endl;
  return 1;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out;
};

harness::ExperimentConfig load(const Common& c) {
  harness::ExperimentConfig cfg = c.config.empty() ? harness::ExperimentConfig{} : harness::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.deterministic) cfg.deterministic = true;
  // Gradient reduction order depends on the worker count; pin it.
  if (cfg.deterministic && cfg.workers == 0) cfg.workers = 1;
  if (cfg.workers == 0) cfg.workers = std::max(1u, std::thread::hardware_concurrency());
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

fs::path output_dir(const harness::ExperimentConfig& cfg, const Common& c) {
  return c.out.empty() ? cfg.resolve(cfg.output_dir) : fs::path(c.out);
}

int cmd_train(const Common& c) {
  auto cfg = load(c);
  const fs::path dir = output_dir(cfg, c);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "config.ini");
    f << harness::serialize_config(cfg);
  }
  const auto report = harness::run_experiment(cfg, dir / "model.ckpt", std::cerr);
  harness::write_report_files(report, dir);
  double slowest = 0.0;
  for (const auto& r : report.runs) slowest = std::max(slowest, r.seconds);
  return pass("train", "experiment=" + report.experiment + " runs=" + std::to_string(report.runs.size()) +
                           " mean_accuracy=" + num(report.mean_accuracy) + " std=" + num(report.std_accuracy) +
                           " max_run_seconds=" + num(slowest) + " out=" + dir.string());
}

int cmd_eval(const Common& c, const std::string& checkpoint) {
  const auto cfg = load(c);
  const auto r = harness::evaluate_checkpoint(cfg, checkpoint);
  return pass("eval", "accuracy=" + num(r.accuracy) + " loss=" + num(r.loss) + " count=" + std::to_string(r.count));
}

int cmd_equiv(const Common& c) {
  auto cfg = load(c);
  const auto report = harness::run_grid_equivalence(cfg.equivalence_images, cfg.equivalence_size, cfg.seed);
  std::string details;
  for (const auto& k : report.cases) {
    const std::string tag = std::to_string(k.kernel) + "x" + std::to_string(k.kernel);
    std::cerr << tag << ": " << k.images << " images, max interior error " << k.max_abs_error
              << " (all pixels " << k.max_abs_error_all << ")" << std::endl;
    details += " max_error_" + tag + "=" + num(k.max_abs_error);
  }
  details += " seconds=" + num(report.seconds);
  if (!report.pass()) return fail("equiv-check", "interior error above " + num(report.tolerance) + ";" + details);
  return pass("equiv-check", details.substr(1));
}

int cmd_grad(const Common& c) {
  const std::uint64_t seed = c.seed.value_or(1);
  const auto results = harness::run_grad_checks(seed);
  double worst = 0.0;
  std::string failed;
  for (const auto& r : results) {
    std::cerr << (r.pass ? "ok   " : "FAIL ") << r.name << ": " << r.entries << " entries, max rel. error "
              << r.max_relative_error << std::endl;
    worst = std::max(worst, r.max_relative_error);
    if (!r.pass) failed += (failed.empty() ? "" : ", ") + r.name;
  }
  if (!failed.empty()) return fail("grad-check", "mismatch in " + failed);
  return pass("grad-check", "checks=" + std::to_string(results.size()) + " max_relative_error=" + num(worst));
}

int cmd_bench(const Common& c) {
  auto cfg = load(c);
  const auto report = harness::run_bench(cfg.bench, cfg.seed, cfg.workers, &std::cerr);
  const fs::path dir = output_dir(cfg, c);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "bench.csv");
    harness::write_bench_csv(f, report);
  }
  const std::string details = "kernel_variation=" + num(report.kernel_variation) + " depth_r2=" +
                              num(report.depth_r2) + " edge_ratio_min=" + num(report.edge_ratio_min) +
                              " edge_ratio_max=" + num(report.edge_ratio_max) + " csv=" + (dir / "bench.csv").string();
  if (!report.pass()) return fail("bench", details);
  return pass("bench", details);
}

int cmd_export(const std::string& checkpoint, std::size_t layer, std::size_t resolution, const std::string& out) {
  std::ifstream in(checkpoint, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + checkpoint);
  if (out.empty() || out == "-") {
    harness::export_kernels_from_checkpoint(in, layer, resolution, std::cout);
    std::cout.flush();
    std::cerr << "RESULT PASS export-kernels" << std::endl;
    return 0;
  }
  std::ofstream f(out);
  harness::export_kernels_from_checkpoint(in, layer, resolution, f);
  return pass("export-kernels", "csv=" + out);
}

struct ConvertArgs {
  std::string kind, input, labels, cites, output, pseudo = "cartesian", neighborhood = "full8";
  bool self_loops = false;
  std::size_t limit = SIZE_MAX;
};

int cmd_convert(const ConvertArgs& a) {
  std::vector<Graph> graphs;
  if (a.kind == "image") {
    const auto images = load_idx_images(a.input, a.limit);
    const auto labels = a.labels.empty() ? std::vector<int>{} : load_idx_labels(a.labels, a.limit);
    Neighborhood nb = Neighborhood::full8;
    if (a.neighborhood == "cross4") nb = Neighborhood::cross4;
    else if (a.neighborhood == "full24") nb = Neighborhood::full24;
    else if (a.neighborhood != "full8") throw std::invalid_argument("unknown neighborhood " + a.neighborhood);
    graphs = harness::convert_images(images, labels, nb, a.self_loops, a.pseudo);
  } else if (a.kind == "mesh") {
    graphs.push_back(harness::convert_mesh(load_off_mesh(a.input), a.pseudo));
  } else if (a.kind == "cora") {
    if (a.cites.empty()) throw std::invalid_argument("--cites is required for cora");
    graphs.push_back(harness::convert_cora(load_cora(a.input, a.cites)));
  } else {
    throw std::invalid_argument("unknown kind '" + a.kind + "' (image, mesh or cora)");
  }
  save_graph_container(a.output, std::span<const Graph>(graphs));
  std::size_t edges = 0;
  for (const auto& g : graphs) edges += g.num_edges();
  return pass("convert", "graphs=" + std::to_string(graphs.size()) + " edges=" + std::to_string(edges) +
                             " output=" + a.output);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SplineCNN experiments: training, checks, benchmarks, conversion"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool with_config_required) {
    auto* opt = sub->add_option("--config", common.config, "experiment config (INI)");
    if (with_config_required) opt->required()->check(CLI::ExistingFile);
    else opt->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "override the config seed");
    sub->add_flag("--deterministic", common.deterministic, "fixed worker count and reduction order");
    sub->add_option("--out", common.out, "output directory");
  };

  auto* train = app.add_subcommand("train", "train and evaluate; writes metrics.csv, results.csv, report.txt");
  add_common(train, true);

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "test accuracy of a checkpoint");
  add_common(eval, true);
  eval->add_option("--checkpoint", checkpoint, "model.ckpt written by train")->required()->check(CLI::ExistingFile);

  auto* equiv = app.add_subcommand("equiv-check", "SplineConv vs dense convolution on grid graphs");
  add_common(equiv, false);

  auto* grad = app.add_subcommand("grad-check", "analytic vs finite-difference gradients");
  add_common(grad, false);

  auto* bench = app.add_subcommand("bench", "runtime sweeps over kernel size, depth and edge count");
  add_common(bench, false);

  std::size_t layer = 0, resolution = 32;
  std::string export_out;
  auto* exp = app.add_subcommand("export-kernels", "sample learned kernels on a grid as CSV");
  exp->add_option("--checkpoint", checkpoint, "model.ckpt")->required()->check(CLI::ExistingFile);
  exp->add_option("--layer", layer, "index of an SConv layer in the architecture")->required();
  exp->add_option("--resolution", resolution, "samples per dimension")->check(CLI::PositiveNumber);
  exp->add_option("--out", export_out, "CSV file (stdout if omitted)");

  ConvertArgs conv;
  auto* convert = app.add_subcommand("convert", "image/mesh/cora data to the graph container format");
  convert->add_option("--kind", conv.kind, "image | mesh | cora")->required();
  convert->add_option("--input", conv.input, "IDX images, OFF mesh or cora.content")->required()->check(CLI::ExistingFile);
  convert->add_option("--labels", conv.labels, "IDX labels (image)")->check(CLI::ExistingFile);
  convert->add_option("--cites", conv.cites, "cora.cites (cora)")->check(CLI::ExistingFile);
  convert->add_option("--output", conv.output, "container file")->required();
  convert->add_option("--pseudo", conv.pseudo, "cartesian | polar | spherical");
  convert->add_option("--neighborhood", conv.neighborhood, "cross4 | full8 | full24 (image)");
  convert->add_flag("--self-loops", conv.self_loops, "add i -> i edges (image)");
  convert->add_option("--limit", conv.limit, "convert at most this many images");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cout << "RESULT FAIL usage reason=" << quote(e.what()) << std::endl;
    return code;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (train->parsed()) return cmd_train(common);
    if (eval->parsed()) return cmd_eval(common, checkpoint);
    if (equiv->parsed()) return cmd_equiv(common);
    if (grad->parsed()) return cmd_grad(common);
    if (bench->parsed()) return cmd_bench(common);
    if (exp->parsed()) return cmd_export(checkpoint, layer, resolution, export_out);
    if (convert->parsed()) return cmd_convert(conv);
  } catch (const std::exception& e) {
    return fail(name, e.what());
  }
  return fail(name, "unhandled command");
}
