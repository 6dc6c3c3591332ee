#include "headline_forge/losses.hpp"

#include <algorithm>
#include <cmath>

#include "headline_forge/error.hpp"

namespace hf {

LossResult mse(const Tensor& pred, const Tensor& target) {
  require(pred.same_shape(target), ErrorCode::shape,
          "mse: " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
  require(pred.size() > 0, ErrorCode::shape, "mse of empty tensors");
  const double n = static_cast<double>(pred.size());
  LossResult r{0.0, Tensor(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.value += d * d;
    r.grad[i] = 2.0 * d / n;
  }
  r.value /= n;
  return r;
}

LossResult cross_entropy(const Tensor& probs, std::span<const int> labels) {
  require(probs.rank() == 2 && probs.dim(0) == labels.size(), ErrorCode::shape,
          "cross_entropy: probs " + shape_string(probs.shape()) + " with " +
              std::to_string(labels.size()) + " labels");
  const std::size_t rows = probs.dim(0), classes = probs.dim(1);
  LossResult r{0.0, Tensor(probs.shape())};
  for (std::size_t i = 0; i < rows; ++i) {
    const int label = labels[i];
    require(label >= 0 && static_cast<std::size_t>(label) < classes, ErrorCode::domain,
            "cross_entropy: label out of range");
    const double p = std::max(probs.at(i, static_cast<std::size_t>(label)), kProbabilityFloor);
    r.value -= std::log(p);
    r.grad.at(i, static_cast<std::size_t>(label)) = -1.0 / (p * static_cast<double>(rows));
  }
  r.value /= static_cast<double>(rows);
  return r;
}

}  // namespace hf
