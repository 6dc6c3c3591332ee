#pragma once

// Differentiable building blocks. Every layer keeps its parameters in
// `Param`s and exposes a const forward plus a backward that takes whatever
// the forward produced, accumulates parameter gradients, and returns the
// gradient with respect to its input. Forward passes never mutate the layer,
// so a trained layer can be shared by concurrent inference calls.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "headline_forge/rng.hpp"
#include "headline_forge/tensor.hpp"

namespace hf {

enum class Mode { train, infer };

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string param_name, Tensor initial)
      : name(std::move(param_name)), value(std::move(initial)), grad(Tensor::zeros_like(value)) {}

  void zero_grad() { grad.fill(0.0); }
};

Tensor uniform_tensor(Shape shape, double limit, Rng& rng);

// y = x W + b for x: [batch, in], W: [in, out], b: [out].
class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_features() const { return weight.value.dim(0); }
  std::size_t out_features() const { return weight.value.dim(1); }

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& dy);
  std::vector<Param*> params() { return {&weight, &bias}; }

  Param weight;
  Param bias;
};

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);
Tensor sigmoid(const Tensor& x);
// Takes the forward output y = sigmoid(x).
Tensor sigmoid_backward(const Tensor& y, const Tensor& dy);
Tensor tanh(const Tensor& x);
// Takes the forward output y = tanh(x).
Tensor tanh_backward(const Tensor& y, const Tensor& dy);
// Softmax over the last axis.
Tensor softmax(const Tensor& x);
// Takes the forward output y = softmax(x).
Tensor softmax_backward(const Tensor& y, const Tensor& dy);

inline double sigmoid_scalar(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Token ids for a batch of fixed-length sequences; id 0 is padding.
struct IdBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<std::int32_t> ids;

  std::int32_t at(std::size_t b, std::size_t t) const { return ids[b * length + t]; }
  bool real(std::size_t b, std::size_t t) const { return at(b, t) != 0; }
};

// Table lookup [vocab, dim]. Row 0 is padding: always zero and never updated.
class Embedding {
 public:
  Embedding() = default;
  Embedding(const std::string& name, std::size_t vocab, std::size_t dim, Rng& rng);

  std::size_t vocab_size() const { return table.value.dim(0); }
  std::size_t dim() const { return table.value.dim(1); }

  // [batch, length, dim]
  Tensor forward(const IdBatch& ids) const;
  void backward(const IdBatch& ids, const Tensor& dy);
  std::vector<Param*> params() { return {&table}; }

  Param table;
};

struct BatchNormCache {
  Tensor xhat;
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<double> inv_std;
};

// Per-feature normalization over the batch axis of [batch, features].
class BatchNorm {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm() = default;
  BatchNorm(const std::string& name, std::size_t features);

  Tensor forward_train(const Tensor& x, BatchNormCache& cache) const;
  Tensor forward_infer(const Tensor& x) const;
  Tensor backward(const BatchNormCache& cache, const Tensor& dy);
  void update_running(const BatchNormCache& cache);
  std::vector<Param*> params() { return {&gamma, &beta}; }

  Param gamma;
  Param beta;
  Tensor running_mean;
  Tensor running_var;
};

// Per-element multipliers: 0 for dropped, 1/(1-rate) for kept. Empty when the
// layer acted as the identity.
struct DropoutMask {
  std::vector<double> scale;
};

Tensor dropout_forward(const Tensor& x, double rate, Mode mode, Rng* rng, DropoutMask& mask);
Tensor dropout_backward(const DropoutMask& mask, const Tensor& dy);

struct PoolCache {
  Shape input_shape;
  std::vector<std::uint32_t> argmax;
};

// Non-overlapping max pooling over [batch, ch, h, w] with ceil semantics at
// ragged edges.
Tensor maxpool2d_forward(const Tensor& x, std::size_t pool_h, std::size_t pool_w,
                         PoolCache* cache);
Tensor maxpool2d_backward(const PoolCache& cache, const Tensor& dy);

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace hf
