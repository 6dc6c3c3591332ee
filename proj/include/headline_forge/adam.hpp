#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "headline_forge/layers.hpp"

namespace hf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. Moment buffers are bound to parameters by position, so
// the same parameter list must be passed to every step.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(std::span<Param* const> params);

  std::size_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::size_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace hf
