#ifndef SPLINECNN_NN_LOSS_HPP
#define SPLINECNN_NN_LOSS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "splinecnn/tensor.hpp"

namespace splinecnn::nn {

template <class T>
struct LossResult {
  double loss = 0.0;
  Matrix<T> grad;      // dL/dlogits
  std::size_t count = 0;
  std::size_t correct = 0;  // argmax hits among the counted rows
};

/// Mean over selected rows of -log softmax(logits)[label]. An empty mask
/// selects every row; otherwise rows with mask[r] != 0 count. Rows outside
/// the mask get zero gradient.
template <class T>
LossResult<T> softmax_cross_entropy(const Matrix<T>& logits, std::span<const int> labels,
                                    std::span<const std::uint8_t> mask = {}) {
  if (labels.size() != logits.rows()) throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  if (!mask.empty() && mask.size() != logits.rows())
    throw std::invalid_argument("softmax_cross_entropy: mask size mismatch");
  LossResult<T> result;
  result.grad = Matrix<T>(logits.rows(), logits.cols());
  const std::size_t classes = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r)
    if (mask.empty() || mask[r]) ++result.count;
  if (result.count == 0) return result;

  std::vector<double> prob(classes);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (!mask.empty() && !mask[r]) continue;
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) + " out of range");
    const auto row = logits.row(r);
    const double top = static_cast<double>(*std::max_element(row.begin(), row.end()));
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += prob[c] = std::exp(static_cast<double>(row[c]) - top);
    const double log_total = std::log(total);
    result.loss += -(static_cast<double>(row[static_cast<std::size_t>(label)]) - top - log_total);
    const auto predicted = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (predicted == static_cast<std::size_t>(label)) ++result.correct;
    for (std::size_t c = 0; c < classes; ++c) {
      const double onehot = c == static_cast<std::size_t>(label) ? 1.0 : 0.0;
      result.grad(r, c) = static_cast<T>((prob[c] / total - onehot) / static_cast<double>(result.count));
    }
  }
  result.loss /= static_cast<double>(result.count);
  return result;
}

}  // namespace splinecnn::nn

#endif  // SPLINECNN_NN_LOSS_HPP
