#ifndef SPLINECNN_NN_ADAM_HPP
#define SPLINECNN_NN_ADAM_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace splinecnn::nn {

/// A trainable tensor viewed as flat value/gradient spans.
template <class T>
struct ParamRef {
  std::string name;
  std::span<T> value;
  std::span<T> grad;
};

enum class WeightDecay { decoupled, coupled };

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  /// decoupled: theta -= lr * wd * theta before the Adam step.
  /// coupled: wd * theta is added to the gradient (classic L2 penalty).
  WeightDecay decay_mode = WeightDecay::decoupled;
};

template <class T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  const AdamOptions& options() const noexcept { return options_; }
  std::size_t step_count() const noexcept { return step_; }

  /// Bias-corrected Adam update of every parameter from its gradient.
  void step(std::span<ParamRef<T>> params) {
    if (first_.empty()) {
      for (const auto& p : params) {
        first_.emplace_back(p.value.size(), 0.0);
        second_.emplace_back(p.value.size(), 0.0);
      }
    }
    if (first_.size() != params.size()) throw std::invalid_argument("Adam::step: parameter list changed");
    ++step_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
    const double wd = options_.weight_decay;
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto value = params[k].value;
      auto grad = params[k].grad;
      auto& m = first_[k];
      auto& v = second_[k];
      if (m.size() != value.size() || grad.size() != value.size())
        throw std::invalid_argument("Adam::step: shape of '" + params[k].name + "' changed");
      for (std::size_t i = 0; i < value.size(); ++i) {
        double theta = static_cast<double>(value[i]);
        double g = static_cast<double>(grad[i]);
        if (wd != 0.0) {
          if (options_.decay_mode == WeightDecay::coupled) g += wd * theta;
          else theta -= options_.lr * wd * theta;
        }
        m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
        v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        theta -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
        value[i] = static_cast<T>(theta);
      }
    }
  }

  void step(std::vector<ParamRef<T>>& params) { step(std::span<ParamRef<T>>(params)); }

 private:
  AdamOptions options_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> first_, second_;
};

}  // namespace splinecnn::nn

#endif  // SPLINECNN_NN_ADAM_HPP
