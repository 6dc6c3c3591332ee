#pragma once

#include <string>
#include <vector>

#include "headline_forge/layers.hpp"

namespace hf {

enum class Padding { valid, same };

// Cross-correlation (no kernel flip) + bias + ReLU over [batch, ch, h, w].
// Kernels are [ch_out, ch_in, kh, kw]; stride 1.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, std::size_t ch_in, std::size_t ch_out, std::size_t kernel_h,
         std::size_t kernel_w, Padding padding, Rng& rng);

  std::size_t in_channels() const { return weight.value.dim(1); }
  std::size_t out_channels() const { return weight.value.dim(0); }
  std::size_t kernel_h() const { return weight.value.dim(2); }
  std::size_t kernel_w() const { return weight.value.dim(3); }
  Padding padding() const { return padding_; }

  // Output spatial dims for an input of h x w.
  std::pair<std::size_t, std::size_t> output_size(std::size_t h, std::size_t w) const;

  Tensor forward(const Tensor& x) const;
  // x and y are the forward input and (post-ReLU) output.
  Tensor backward(const Tensor& x, const Tensor& y, const Tensor& dy);
  std::vector<Param*> params() { return {&weight, &bias}; }

  Param weight;
  Param bias;

 private:
  Padding padding_ = Padding::same;
};

// Conv over [batch, len, ch] with width-k kernels, computed as a height-1
// Conv2d. Bias and ReLU fused.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, std::size_t ch_in, std::size_t ch_out, std::size_t width,
         Padding padding, Rng& rng);

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& y, const Tensor& dy);
  std::vector<Param*> params() { return conv_.params(); }

  Conv2d& conv() { return conv_; }
  const Conv2d& conv() const { return conv_; }

 private:
  Conv2d conv_;
};

}  // namespace hf
