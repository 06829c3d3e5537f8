#ifndef SPLINECNN_NETWORK_HPP
#define SPLINECNN_NETWORK_HPP

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "splinecnn/architecture.hpp"
#include "splinecnn/graph.hpp"
#include "splinecnn/nn/activation.hpp"
#include "splinecnn/nn/adam.hpp"
#include "splinecnn/nn/dense.hpp"
#include "splinecnn/nn/pool.hpp"
#include "splinecnn/pseudo.hpp"
#include "splinecnn/spline_basis.hpp"
#include "splinecnn/spline_conv.hpp"

namespace splinecnn {

struct NetworkOptions {
  int degree = 1;
  PseudoKind pseudo = PseudoKind::cartesian2;
  bool use_root = true;
  bool normalize = true;
  std::uint64_t seed = 0;        // weight init and dropout masks
  std::uint64_t pool_seed = 1;   // matching visit order
  std::size_t workers = 1;
};

/// Angle dimensions wrap around; everything else is open.
inline std::vector<bool> closed_dims(PseudoKind kind) {
  switch (kind) {
    case PseudoKind::polar2: return {false, true};
    case PseudoKind::spherical3: return {false, true, false};
    default: return std::vector<bool>(pseudo_dim(kind), false);
  }
}

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// One graph resolution inside a network: the (batched) graph plus lazily
/// computed basis plans and pooled children. Not thread-safe.
template <class T>
class GraphLevel {
 public:
  struct Pooled {
    nn::Coarsening coarsening;  // cluster map; the coarse batch lives in `level`
    std::shared_ptr<const GraphLevel> level;
  };

  explicit GraphLevel(Batch batch) : batch_(std::move(batch)) {}

  const Batch& batch() const noexcept { return batch_; }
  const Graph& graph() const noexcept { return batch_.graph; }

  const BasisPlan<T>& plan(const KernelConfig& config) const {
    auto it = plans_.find(config);
    if (it == plans_.end()) it = plans_.emplace(config, compute_plan<T>(batch_.graph.pseudo(), config)).first;
    return it->second;
  }

  const Pooled& pooled(std::size_t key, std::size_t cluster_size, std::optional<std::uint64_t> seed,
                       PseudoKind kind) const {
    auto it = pooled_.find(key);
    if (it == pooled_.end()) {
      Pooled p;
      p.coarsening = nn::graclus_coarsen(batch_, cluster_size, seed, kind);
      p.level = std::make_shared<const GraphLevel>(std::move(p.coarsening.coarse));
      p.coarsening.coarse = Batch{};
      it = pooled_.emplace(key, std::move(p)).first;
    }
    return it->second;
  }

 private:
  Batch batch_;
  mutable std::map<KernelConfig, BasisPlan<T>> plans_;
  mutable std::map<std::size_t, Pooled> pooled_;
};

/// Feed-forward chain of SConv / MaxP / FC / Lin / AvgP / ELU / Dropout
/// layers. Node-level features flow until AvgP or FC; FC on node-level
/// features flattens each example (all examples must have equal node count).
template <class T>
class Network {
 public:
  Network(Architecture arch, NetworkOptions options, const Batch& sample)
      : arch_(std::move(arch)), options_(std::move(options)), rng_(splitmix64(options_.seed ^ 0xd1ce5eedULL)) {
    auto level = std::make_shared<const GraphLevel<T>>(sample);
    std::size_t dim = sample.graph.feature_dim();
    bool node_level = true;
    for (std::size_t k = 0; k < arch_.size(); ++k) {
      Layer layer;
      const LayerSpec& spec = arch_[k];
      auto fail = [&](const std::string& what) {
        throw std::invalid_argument("layer " + std::to_string(k) + " (" + to_string(spec) + "): " + what);
      };
      if (const auto* s = std::get_if<SConvSpec>(&spec)) {
        if (!node_level) fail("needs node-level features");
        if (s->in != dim) fail("expects " + std::to_string(s->in) + " input features, previous layer gives " + std::to_string(dim));
        const std::size_t d = pseudo_dim(options_.pseudo);
        if (s->kernel_size.size() != d)
          fail("kernel has " + std::to_string(s->kernel_size.size()) + " dimensions, pseudo-coordinates have " + std::to_string(d));
        SplineConvLayer<T> conv(KernelConfig(options_.degree, s->kernel_size, closed_dims(options_.pseudo)), s->in, s->out,
                                options_.use_root, options_.normalize);
        conv.init_weights(splitmix64(options_.seed * 1000 + k));
        conv.set_workers(options_.workers);
        layer.module = std::move(conv);
        dim = s->out;
      } else if (const auto* s = std::get_if<MaxPSpec>(&spec)) {
        if (!node_level) fail("needs node-level features");
        level = level->pooled(k, s->cluster_size, pool_seed(k), options_.pseudo).level;
      } else if (const auto* s = std::get_if<FCSpec>(&spec)) {
        std::size_t in = dim;
        if (node_level) {
          const std::size_t nodes = level->batch().nodes_in(0);
          for (std::size_t e = 1; e < level->batch().example_count(); ++e)
            if (level->batch().nodes_in(e) != nodes) fail("examples have different node counts, cannot flatten");
          in = nodes * dim;
          layer.flatten = true;
          node_level = false;
        }
        nn::DenseLayer<T> dense(in, s->out);
        dense.init_weights(splitmix64(options_.seed * 1000 + k));
        layer.module = std::move(dense);
        dim = s->out;
      } else if (const auto* s = std::get_if<LinSpec>(&spec)) {
        if (!node_level) fail("needs node-level features");
        nn::DenseLayer<T> dense(dim, s->out);
        dense.init_weights(splitmix64(options_.seed * 1000 + k));
        layer.module = std::move(dense);
        dim = s->out;
      } else if (std::holds_alternative<AvgPSpec>(spec)) {
        if (!node_level) fail("needs node-level features");
        node_level = false;
      }
      layers_.push_back(std::move(layer));
    }
    output_dim_ = dim;
    output_node_level_ = node_level;
  }

  const Architecture& architecture() const noexcept { return arch_; }
  const NetworkOptions& options() const noexcept { return options_; }
  std::size_t output_dim() const noexcept { return output_dim_; }
  bool output_is_node_level() const noexcept { return output_node_level_; }
  std::mt19937_64& rng() noexcept { return rng_; }

  /// Runs the chain; in training mode dropout is active and a tape for
  /// backward() is recorded.
  Matrix<T> forward(const std::shared_ptr<const GraphLevel<T>>& input_level, Matrix<T> x, bool training) {
    tape_.assign(layers_.size(), Tape{});
    auto level = input_level;
    bool node_level = true;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      Layer& layer = layers_[k];
      Tape& tape = tape_[k];
      tape.level = level;
      tape.node_level = node_level;
      const LayerSpec& spec = arch_[k];
      if (std::holds_alternative<SConvSpec>(spec)) {
        auto& conv = std::get<SplineConvLayer<T>>(layer.module);
        const auto& plan = level->plan(conv.config());
        x = conv.forward(level->graph(), plan, x, training ? &tape.conv : nullptr);
      } else if (const auto* s = std::get_if<MaxPSpec>(&spec)) {
        const auto& pooled = level->pooled(k, s->cluster_size, pool_seed(k), options_.pseudo);
        tape.fine_rows = x.rows();
        x = nn::max_pool(x, pooled.coarsening, training ? &tape.argmax : nullptr);
        level = pooled.level;
      } else if (std::holds_alternative<FCSpec>(spec) || std::holds_alternative<LinSpec>(spec)) {
        auto& dense = std::get<nn::DenseLayer<T>>(layer.module);
        if (layer.flatten) {
          const std::size_t examples = level->batch().example_count();
          tape.flat_rows = x.rows();
          tape.flat_cols = x.cols();
          if (examples == 0 || x.rows() % examples != 0)
            throw std::invalid_argument("FC flatten: node count not divisible by example count");
          x.reshape(examples, x.rows() / examples * x.cols());
          node_level = false;
        }
        if (training) tape.input = x;
        x = dense.forward(x);
      } else if (std::holds_alternative<AvgPSpec>(spec)) {
        x = nn::global_avg_pool(x, level->batch().node_offsets);
        node_level = false;
      } else if (std::holds_alternative<EluSpec>(spec)) {
        if (training) tape.input = x;
        x = nn::elu(x);
      } else if (const auto* s = std::get_if<DropoutSpec>(&spec)) {
        x = nn::dropout(x, s->p, training, rng_, &tape.mask);
      }
    }
    trained_forward_ = training;
    return x;
  }

  /// Backpropagates d(loss)/d(output) through the recorded tape, accumulating
  /// parameter gradients. Returns d(loss)/d(input) when requested.
  Matrix<T> backward(Matrix<T> grad, bool need_input_grad = false) {
    if (!trained_forward_ || tape_.size() != layers_.size())
      throw std::logic_error("Network::backward requires a preceding forward in training mode");
    std::size_t stop = 0;
    if (!need_input_grad) {
      // Nothing before the first parametric layer needs a gradient.
      while (stop < layers_.size() && std::holds_alternative<std::monostate>(layers_[stop].module)) ++stop;
    }
    for (std::size_t k = layers_.size(); k-- > stop;) {
      Layer& layer = layers_[k];
      Tape& tape = tape_[k];
      const LayerSpec& spec = arch_[k];
      const bool want_input = need_input_grad || k > stop;
      if (std::holds_alternative<SConvSpec>(spec)) {
        grad = std::get<SplineConvLayer<T>>(layer.module).backward(tape.conv, grad, want_input);
      } else if (std::holds_alternative<MaxPSpec>(spec)) {
        grad = nn::max_pool_backward(tape.argmax, grad, tape.fine_rows);
      } else if (std::holds_alternative<FCSpec>(spec) || std::holds_alternative<LinSpec>(spec)) {
        grad = std::get<nn::DenseLayer<T>>(layer.module).backward(tape.input, grad);
        if (layer.flatten) grad.reshape(tape.flat_rows, tape.flat_cols);
      } else if (std::holds_alternative<AvgPSpec>(spec)) {
        grad = nn::global_avg_pool_backward(grad, tape.level->batch().node_offsets);
      } else if (std::holds_alternative<EluSpec>(spec)) {
        grad = nn::elu_backward(tape.input, grad);
      } else if (std::holds_alternative<DropoutSpec>(spec)) {
        grad = nn::dropout_backward(tape.mask, grad);
      }
    }
    return need_input_grad ? grad : Matrix<T>{};
  }

  void zero_grad() {
    for (auto& layer : layers_) {
      if (auto* conv = std::get_if<SplineConvLayer<T>>(&layer.module)) conv->zero_grad();
      if (auto* dense = std::get_if<nn::DenseLayer<T>>(&layer.module)) dense->zero_grad();
    }
  }

  std::vector<nn::ParamRef<T>> parameters() {
    std::vector<nn::ParamRef<T>> params;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const std::string prefix = "layer" + std::to_string(k) + ".";
      if (auto* conv = std::get_if<SplineConvLayer<T>>(&layers_[k].module)) {
        params.push_back({prefix + "weight", conv->weight().flat(), conv->grad_weight().flat()});
        if (conv->use_root()) params.push_back({prefix + "root", conv->root().flat(), conv->grad_root().flat()});
      } else if (auto* dense = std::get_if<nn::DenseLayer<T>>(&layers_[k].module)) {
        params.push_back({prefix + "weight", dense->weight().flat(), dense->grad_weight().flat()});
        params.push_back({prefix + "bias", dense->bias().flat(), dense->grad_bias().flat()});
      }
    }
    return params;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.value.size();
    return n;
  }

  /// Layer k as a spline convolution, or nullptr.
  SplineConvLayer<T>* conv_layer(std::size_t k) {
    return k < layers_.size() ? std::get_if<SplineConvLayer<T>>(&layers_[k].module) : nullptr;
  }
  nn::DenseLayer<T>* dense_layer(std::size_t k) {
    return k < layers_.size() ? std::get_if<nn::DenseLayer<T>>(&layers_[k].module) : nullptr;
  }

  /// Checkpoint:
  ///   SPLINECNN-NETWORK 1
  ///   <architecture string>
  ///   LAYER <k>  followed by a SPLINECONV or DENSE block, per parametric layer
  ///   END
  void save(std::ostream& out) const {
    out << "SPLINECNN-NETWORK 1\n" << to_string(arch_) << '\n';
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      if (const auto* conv = std::get_if<SplineConvLayer<T>>(&layers_[k].module)) {
        out << "LAYER " << k << '\n';
        conv->save(out);
      } else if (const auto* dense = std::get_if<nn::DenseLayer<T>>(&layers_[k].module)) {
        out << "LAYER " << k << '\n';
        dense->save(out);
      }
    }
    out << "END\n";
  }

  /// Overwrites parameters from a checkpoint written for the same architecture.
  void load_parameters(std::istream& in) {
    expect_token(in, "SPLINECNN-NETWORK");
    if (read_value<int>(in) != 1) throw std::runtime_error("unsupported network checkpoint version");
    std::string line;
    std::getline(in >> std::ws, line);
    if (parse_architecture(line) != arch_)
      throw std::runtime_error("checkpoint architecture '" + line + "' does not match '" + to_string(arch_) + "'");
    std::string token;
    while (in >> token && token != "END") {
      if (token != "LAYER") throw std::runtime_error("checkpoint: expected LAYER, got '" + token + "'");
      const auto k = read_value<std::size_t>(in);
      if (k >= layers_.size()) throw std::runtime_error("checkpoint: layer index out of range");
      if (auto* conv = std::get_if<SplineConvLayer<T>>(&layers_[k].module)) {
        auto loaded = SplineConvLayer<T>::load(in);
        if (loaded.config() != conv->config() || loaded.in_features() != conv->in_features() ||
            loaded.out_features() != conv->out_features() || loaded.use_root() != conv->use_root() ||
            loaded.normalize() != conv->normalize())
          throw std::runtime_error("checkpoint: layer " + std::to_string(k) + " shape mismatch");
        conv->weight() = loaded.weight();
        conv->root() = loaded.root();
      } else if (auto* dense = std::get_if<nn::DenseLayer<T>>(&layers_[k].module)) {
        auto loaded = nn::DenseLayer<T>::load(in);
        if (loaded.in_features() != dense->in_features() || loaded.out_features() != dense->out_features())
          throw std::runtime_error("checkpoint: layer " + std::to_string(k) + " shape mismatch");
        dense->weight() = loaded.weight();
        dense->bias() = loaded.bias();
      } else {
        throw std::runtime_error("checkpoint: layer " + std::to_string(k) + " has no parameters");
      }
    }
    if (token != "END") throw std::runtime_error("checkpoint: missing END");
  }

 private:
  struct Layer {
    std::variant<std::monostate, SplineConvLayer<T>, nn::DenseLayer<T>> module;
    bool flatten = false;
  };
  struct Tape {
    std::shared_ptr<const GraphLevel<T>> level;
    bool node_level = true;
    Matrix<T> input;
    SplineConvContext<T> conv;
    Matrix<std::size_t> argmax;
    std::vector<T> mask;
    std::size_t fine_rows = 0, flat_rows = 0, flat_cols = 0;
  };

  std::optional<std::uint64_t> pool_seed(std::size_t k) const { return options_.pool_seed + 1000 * k; }

  Architecture arch_;
  NetworkOptions options_;
  std::mt19937_64 rng_;
  std::vector<Layer> layers_;
  std::vector<Tape> tape_;
  std::size_t output_dim_ = 0;
  bool output_node_level_ = true;
  bool trained_forward_ = false;
};

/// Parametric layers of a network checkpoint, without rebuilding the network.
template <class T>
struct CheckpointLayers {
  Architecture architecture;
  std::map<std::size_t, SplineConvLayer<T>> convs;
  std::map<std::size_t, nn::DenseLayer<T>> denses;
};

template <class T>
CheckpointLayers<T> read_checkpoint_layers(std::istream& in) {
  CheckpointLayers<T> out;
  expect_token(in, "SPLINECNN-NETWORK");
  if (read_value<int>(in) != 1) throw std::runtime_error("unsupported network checkpoint version");
  std::string line;
  std::getline(in >> std::ws, line);
  out.architecture = parse_architecture(line);
  std::string token;
  while (in >> token && token != "END") {
    if (token != "LAYER") throw std::runtime_error("checkpoint: expected LAYER, got '" + token + "'");
    const auto k = read_value<std::size_t>(in);
    if (k >= out.architecture.size()) throw std::runtime_error("checkpoint: layer index out of range");
    if (std::holds_alternative<SConvSpec>(out.architecture[k])) out.convs.emplace(k, SplineConvLayer<T>::load(in));
    else out.denses.emplace(k, nn::DenseLayer<T>::load(in));
  }
  return out;
}

}  // namespace splinecnn

#endif  // SPLINECNN_NETWORK_HPP
