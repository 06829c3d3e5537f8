#ifndef SPLINECNN_HARNESS_CONFIG_HPP
#define SPLINECNN_HARNESS_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "splinecnn/architecture.hpp"
#include "splinecnn/error.hpp"
#include "splinecnn/graph.hpp"
#include "splinecnn/io.hpp"
#include "splinecnn/nn/adam.hpp"

namespace splinecnn::harness {

// Config files are flat `key = value` lines grouped under `[section]`
// headers. Blank lines and lines starting with '#' or ';' are ignored;
// whitespace around keys and values is trimmed. Keys are unique within a
// section; unknown sections or keys are errors. Relative paths are resolved
// against the directory of the config file.
//
//   [experiment]  kind, seed, runs, workers, deterministic
//   [data]        train_images, train_labels, test_images, test_labels,
//                 cora_content, cora_cites, train_count, test_count
//   [model]       architecture, pseudo, degree, neighborhood, self_loops,
//                 root, normalize, pool_seed, dropout (overrides every
//                 Dropout layer when present)
//   [train]       epochs, batch_size, learning_rate, weight_decay,
//                 weight_decay_mode (decoupled | coupled)
//   [bench]       edges, features, kernel_min, kernel_max, depth_max,
//                 depth_edges, depth_features, warmup, repetitions, backward
//   [equivalence] images, size
//   [output]      dir

class IniFile {
 public:
  using Entries = std::vector<std::pair<std::string, std::string>>;

  static IniFile parse(std::string_view text, const std::string& source = "<config>") {
    IniFile ini;
    std::size_t line_no = 0;
    std::size_t start = 0;
    Entries* current = nullptr;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = trim(text.substr(start, end - start));
      ++line_no;
      start = end + 1;
      if (line.empty() || line.front() == '#' || line.front() == ';') {
        if (end == text.size()) break;
        continue;
      }
      if (line.front() == '[') {
        if (line.back() != ']') throw ParseError(source, line_no, "unterminated section header");
        std::string name(trim(line.substr(1, line.size() - 2)));
        if (name.empty()) throw ParseError(source, line_no, "empty section name");
        if (ini.find_section(name)) throw ParseError(source, line_no, "duplicate section [" + name + "]");
        ini.sections_.emplace_back(name, Entries{});
        current = &ini.sections_.back().second;
      } else {
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected 'key = value'");
        if (!current) throw ParseError(source, line_no, "key outside of any [section]");
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ParseError(source, line_no, "empty key");
        for (const auto& [k, v] : *current)
          if (k == key) throw ParseError(source, line_no, "duplicate key '" + key + "'");
        current->emplace_back(std::move(key), std::move(value));
      }
      if (end == text.size()) break;
    }
    return ini;
  }

  std::string serialize() const {
    std::string out;
    for (std::size_t s = 0; s < sections_.size(); ++s) {
      if (s) out += '\n';
      out += "[" + sections_[s].first + "]\n";
      for (const auto& [k, v] : sections_[s].second) out += k + " = " + v + "\n";
    }
    return out;
  }

  void set(const std::string& section, const std::string& key, std::string value) {
    Entries* entries = find_section(section);
    if (!entries) {
      sections_.emplace_back(section, Entries{});
      entries = &sections_.back().second;
    }
    for (auto& [k, v] : *entries) {
      if (k == key) {
        v = std::move(value);
        return;
      }
    }
    entries->emplace_back(key, std::move(value));
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    for (const auto& [name, entries] : sections_) {
      if (name != section) continue;
      for (const auto& [k, v] : entries)
        if (k == key) return v;
    }
    return std::nullopt;
  }

  const std::vector<std::pair<std::string, Entries>>& sections() const noexcept { return sections_; }

  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

 private:
  Entries* find_section(const std::string& name) {
    for (auto& [n, e] : sections_)
      if (n == name) return &e;
    return nullptr;
  }

  std::vector<std::pair<std::string, Entries>> sections_;
};

enum class ExperimentKind { mnist_grid, cora, grid_equivalence, bench };

inline std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::mnist_grid: return "mnist_grid";
    case ExperimentKind::cora: return "cora";
    case ExperimentKind::grid_equivalence: return "grid_equivalence";
    case ExperimentKind::bench: return "bench";
  }
  return "?";
}

inline std::string to_string(Neighborhood nb) {
  switch (nb) {
    case Neighborhood::cross4: return "cross4";
    case Neighborhood::full8: return "full8";
    case Neighborhood::full24: return "full24";
  }
  return "?";
}

struct BenchSettings {
  std::size_t edges = 100000;
  std::size_t features = 32;
  std::size_t kernel_min = 3, kernel_max = 8;
  std::size_t depth_max = 16;
  std::size_t depth_edges = 20000;
  std::size_t depth_features = 16;
  std::size_t warmup = 3;
  std::size_t repetitions = 20;
  bool backward = false;
  friend bool operator==(const BenchSettings&, const BenchSettings&) = default;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::mnist_grid;
  std::uint64_t seed = 1;
  std::size_t runs = 1;
  std::size_t workers = 1;
  bool deterministic = false;

  std::string train_images, train_labels, test_images, test_labels;
  std::string cora_content, cora_cites;
  std::size_t train_count = 0, test_count = 0;

  std::string architecture;
  std::string pseudo = "cartesian";
  int degree = 1;
  Neighborhood neighborhood = Neighborhood::full24;
  bool self_loops = false;
  bool root = true;
  bool normalize = true;
  std::uint64_t pool_seed = 1;
  std::optional<double> dropout;

  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  nn::WeightDecay weight_decay_mode = nn::WeightDecay::decoupled;

  BenchSettings bench;
  std::size_t equivalence_images = 10;
  std::size_t equivalence_size = 8;

  std::string output_dir = "out";

  /// Directory relative paths are resolved against (not serialized).
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const {
    std::filesystem::path p(path);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }

  /// Architecture with the dropout override applied.
  Architecture layers() const {
    Architecture arch = parse_architecture(architecture);
    if (dropout)
      for (auto& layer : arch)
        if (auto* d = std::get_if<DropoutSpec>(&layer)) d->p = *dropout;
    return arch;
  }

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.to_ini().serialize() == b.to_ini().serialize();
  }

  IniFile to_ini() const {
    IniFile ini;
    ini.set("experiment", "kind", to_string(kind));
    ini.set("experiment", "seed", std::to_string(seed));
    ini.set("experiment", "runs", std::to_string(runs));
    ini.set("experiment", "workers", std::to_string(workers));
    ini.set("experiment", "deterministic", deterministic ? "true" : "false");
    auto path = [&](const char* key, const std::string& v) {
      if (!v.empty()) ini.set("data", key, v);
    };
    path("train_images", train_images);
    path("train_labels", train_labels);
    path("test_images", test_images);
    path("test_labels", test_labels);
    path("cora_content", cora_content);
    path("cora_cites", cora_cites);
    ini.set("data", "train_count", std::to_string(train_count));
    ini.set("data", "test_count", std::to_string(test_count));
    if (!architecture.empty()) ini.set("model", "architecture", to_string(parse_architecture(architecture)));
    ini.set("model", "pseudo", pseudo);
    ini.set("model", "degree", std::to_string(degree));
    ini.set("model", "neighborhood", to_string(neighborhood));
    ini.set("model", "self_loops", self_loops ? "true" : "false");
    ini.set("model", "root", root ? "true" : "false");
    ini.set("model", "normalize", normalize ? "true" : "false");
    ini.set("model", "pool_seed", std::to_string(pool_seed));
    if (dropout) ini.set("model", "dropout", format(*dropout));
    ini.set("train", "epochs", std::to_string(epochs));
    ini.set("train", "batch_size", std::to_string(batch_size));
    ini.set("train", "learning_rate", format(learning_rate));
    ini.set("train", "weight_decay", format(weight_decay));
    ini.set("train", "weight_decay_mode", weight_decay_mode == nn::WeightDecay::coupled ? "coupled" : "decoupled");
    ini.set("bench", "edges", std::to_string(bench.edges));
    ini.set("bench", "features", std::to_string(bench.features));
    ini.set("bench", "kernel_min", std::to_string(bench.kernel_min));
    ini.set("bench", "kernel_max", std::to_string(bench.kernel_max));
    ini.set("bench", "depth_max", std::to_string(bench.depth_max));
    ini.set("bench", "depth_edges", std::to_string(bench.depth_edges));
    ini.set("bench", "depth_features", std::to_string(bench.depth_features));
    ini.set("bench", "warmup", std::to_string(bench.warmup));
    ini.set("bench", "repetitions", std::to_string(bench.repetitions));
    ini.set("bench", "backward", bench.backward ? "true" : "false");
    ini.set("equivalence", "images", std::to_string(equivalence_images));
    ini.set("equivalence", "size", std::to_string(equivalence_size));
    ini.set("output", "dir", output_dir);
    return ini;
  }

  static ExperimentConfig from_ini(const IniFile& ini, std::filesystem::path base_dir = {}) {
    ExperimentConfig c;
    c.base_dir = std::move(base_dir);
    for (const auto& [section, entries] : ini.sections()) {
      for (const auto& [key, value] : entries) {
        const std::string where = "[" + section + "] " + key;
        auto fail = [&](const std::string& what) -> void {
          throw std::invalid_argument("config " + where + ": " + what);
        };
        auto uint = [&]() -> std::uint64_t {
          std::uint64_t v = 0;
          auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
          if (ec != std::errc() || p != value.data() + value.size()) fail("expected a non-negative integer, got '" + value + "'");
          return v;
        };
        auto real = [&]() -> double {
          double v = 0;
          auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
          if (ec != std::errc() || p != value.data() + value.size()) fail("expected a number, got '" + value + "'");
          return v;
        };
        auto boolean = [&]() -> bool {
          if (value == "true" || value == "1" || value == "yes") return true;
          if (value == "false" || value == "0" || value == "no") return false;
          fail("expected true or false, got '" + value + "'");
          return false;
        };
        if (section == "experiment") {
          if (key == "kind") {
            if (value == "mnist_grid") c.kind = ExperimentKind::mnist_grid;
            else if (value == "cora") c.kind = ExperimentKind::cora;
            else if (value == "grid_equivalence") c.kind = ExperimentKind::grid_equivalence;
            else if (value == "bench") c.kind = ExperimentKind::bench;
            else fail("unknown experiment '" + value + "'");
          } else if (key == "seed") c.seed = uint();
          else if (key == "runs") c.runs = uint();
          else if (key == "workers") c.workers = uint();
          else if (key == "deterministic") c.deterministic = boolean();
          else fail("unknown key");
        } else if (section == "data") {
          if (key == "train_images") c.train_images = value;
          else if (key == "train_labels") c.train_labels = value;
          else if (key == "test_images") c.test_images = value;
          else if (key == "test_labels") c.test_labels = value;
          else if (key == "cora_content") c.cora_content = value;
          else if (key == "cora_cites") c.cora_cites = value;
          else if (key == "train_count") c.train_count = uint();
          else if (key == "test_count") c.test_count = uint();
          else fail("unknown key");
        } else if (section == "model") {
          if (key == "architecture") {
            try {
              c.architecture = to_string(parse_architecture(value));
            } catch (const ArchitectureError& e) {
              fail(e.what());
            }
          } else if (key == "pseudo") c.pseudo = value;
          else if (key == "degree") c.degree = static_cast<int>(uint());
          else if (key == "neighborhood") {
            if (value == "cross4") c.neighborhood = Neighborhood::cross4;
            else if (value == "full8") c.neighborhood = Neighborhood::full8;
            else if (value == "full24") c.neighborhood = Neighborhood::full24;
            else fail("expected cross4, full8 or full24");
          } else if (key == "self_loops") c.self_loops = boolean();
          else if (key == "root") c.root = boolean();
          else if (key == "normalize") c.normalize = boolean();
          else if (key == "pool_seed") c.pool_seed = uint();
          else if (key == "dropout") c.dropout = real();
          else fail("unknown key");
        } else if (section == "train") {
          if (key == "epochs") c.epochs = uint();
          else if (key == "batch_size") c.batch_size = uint();
          else if (key == "learning_rate") c.learning_rate = real();
          else if (key == "weight_decay") c.weight_decay = real();
          else if (key == "weight_decay_mode") {
            if (value == "decoupled") c.weight_decay_mode = nn::WeightDecay::decoupled;
            else if (value == "coupled") c.weight_decay_mode = nn::WeightDecay::coupled;
            else fail("expected decoupled or coupled");
          } else fail("unknown key");
        } else if (section == "bench") {
          if (key == "edges") c.bench.edges = uint();
          else if (key == "features") c.bench.features = uint();
          else if (key == "kernel_min") c.bench.kernel_min = uint();
          else if (key == "kernel_max") c.bench.kernel_max = uint();
          else if (key == "depth_max") c.bench.depth_max = uint();
          else if (key == "depth_edges") c.bench.depth_edges = uint();
          else if (key == "depth_features") c.bench.depth_features = uint();
          else if (key == "warmup") c.bench.warmup = uint();
          else if (key == "repetitions") c.bench.repetitions = uint();
          else if (key == "backward") c.bench.backward = boolean();
          else fail("unknown key");
        } else if (section == "equivalence") {
          if (key == "images") c.equivalence_images = uint();
          else if (key == "size") c.equivalence_size = uint();
          else fail("unknown key");
        } else if (section == "output") {
          if (key == "dir") c.output_dir = value;
          else fail("unknown key");
        } else {
          throw std::invalid_argument("config: unknown section [" + section + "]");
        }
      }
    }
    c.validate();
    return c;
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
    if (runs == 0) fail("runs must be positive");
    if (degree < 1 || degree > 3) fail("degree must be 1, 2 or 3");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (weight_decay < 0.0) fail("weight_decay must be non-negative");
    if (dropout && !(*dropout >= 0.0 && *dropout < 1.0)) fail("dropout must be in [0,1)");
    if (kind == ExperimentKind::mnist_grid || kind == ExperimentKind::cora) {
      if (architecture.empty()) fail("[model] architecture is required");
      if (batch_size == 0) fail("batch_size must be positive");
      if (train_count == 0 || test_count == 0) fail("train_count and test_count must be positive");
    }
    if (kind == ExperimentKind::bench) {
      if (bench.repetitions == 0 || bench.edges == 0 || bench.features == 0 || bench.depth_max == 0)
        fail("bench sizes must be positive");
      if (bench.kernel_min < 2 || bench.kernel_max < bench.kernel_min) fail("bench kernel range is invalid");
    }
    if (kind == ExperimentKind::grid_equivalence && (equivalence_images == 0 || equivalence_size < 5))
      fail("equivalence needs at least one image of size >= 5");
  }

 private:
  static std::string format(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  }
};

inline ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>",
                                     std::filesystem::path base_dir = {}) {
  return ExperimentConfig::from_ini(IniFile::parse(text, source), std::move(base_dir));
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_file(path), path.string(), path.parent_path());
}

inline std::string serialize_config(const ExperimentConfig& config) { return config.to_ini().serialize(); }

}  // namespace splinecnn::harness

#endif  // SPLINECNN_HARNESS_CONFIG_HPP
