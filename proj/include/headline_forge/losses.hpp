#pragma once

#include <span>

#include "headline_forge/tensor.hpp"

namespace hf {

struct LossResult {
  double value = 0.0;
  Tensor grad;  // d value / d pred
};

// Mean squared error over every element.
LossResult mse(const Tensor& pred, const Tensor& target);

// Mean over rows of -ln p[label], p clamped at 1e-12. Labels are 0-based.
LossResult cross_entropy(const Tensor& probs, std::span<const int> labels);

inline constexpr double kProbabilityFloor = 1e-12;

}  // namespace hf
