#pragma once

// The multi-branch quality model and its baselines. Each network maps a batch
// of ModelInputs to four-way indicator distributions and can backpropagate a
// gradient on those distributions into its parameters.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "headline_forge/features.hpp"
#include "headline_forge/layers.hpp"

namespace hf {

enum class Architecture {
  proposed,
  proposed_no_similarity,
  tfidf_ffnn,
  emb_cnn1d_ffnn,
  emb_bgru_ffnn,
  emb_blstm_ffnn,
};

inline constexpr std::array<Architecture, 6> kAllArchitectures = {
    Architecture::proposed,       Architecture::proposed_no_similarity,
    Architecture::tfidf_ffnn,     Architecture::emb_cnn1d_ffnn,
    Architecture::emb_bgru_ffnn,  Architecture::emb_blstm_ffnn,
};

std::string_view to_string(Architecture arch);
Architecture parse_architecture(std::string_view name);

struct Hyperparameters {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 100;
  std::size_t headline_len = 20;
  std::size_t body_len = 200;
  std::array<std::size_t, 3> conv_filters = {8, 16, 32};
  std::array<std::size_t, 3> conv_kernels = {5, 3, 3};
  std::size_t pool = 2;
  double dropout = 0.2;
  std::size_t similarity_dim = 100;
  std::size_t doc_dim = 100;  // provider output
  std::size_t doc_out = 100;
  std::size_t topics = 50;
  std::size_t head_hidden1 = 200;
  std::size_t head_hidden2 = 50;
  std::size_t cnn_filters = 64;
  std::size_t cnn_width = 3;
  std::size_t rnn_hidden = 64;

  // Width of the flattened similarity feature map.
  std::size_t similarity_flat() const;
  // Width of the fused branch vector feeding the head.
  std::size_t head_input(Architecture arch) const;
};

void to_json(nlohmann::json& j, const Hyperparameters& hp);
void from_json(const nlohmann::json& j, Hyperparameters& hp);

// Hyperparameters matching a fitted feature pipeline.
Hyperparameters hyperparameters_for(const FeaturePipeline& features);

struct SimilarityCache {
  Tensor hn, an;  // unit-normalized rows, zero where masked or zero-length
  std::vector<double> hnorm, anorm;
};

// Cosine similarity of every headline/body token pair:
// h: [batch, lh, d], a: [batch, la, d] -> [batch, 1, lh, la].
Tensor similarity_matrix(const Tensor& h, const Tensor& a, std::span<const std::uint8_t> hmask,
                         std::span<const std::uint8_t> amask, SimilarityCache* cache);
// Returns {dh, da}.
std::pair<Tensor, Tensor> similarity_backward(const SimilarityCache& cache, const Tensor& ds);

// Everything a forward pass keeps for its backward pass.
struct Trace {
  virtual ~Trace() = default;
  Mode mode = Mode::infer;
  Tensor head_input;  // fused features entering the output head
  Tensor probs;       // [batch, 4]
};

class Network {
 public:
  virtual ~Network() = default;
  virtual std::unique_ptr<Trace> forward(std::span<const ModelInput* const> batch, Mode mode,
                                         Rng* rng) const = 0;
  // `trace` must come from a train-mode forward.
  virtual void backward(const Trace& trace, const Tensor& dprobs) = 0;
  virtual void update_running_stats(const Trace&) {}
  virtual std::vector<Param*> params() = 0;
  // Non-trainable persistent tensors (batch-norm running statistics).
  virtual std::vector<std::pair<std::string, Tensor*>> buffers() { return {}; }
};

class Model {
 public:
  Model(Architecture arch, Hyperparameters hp, std::uint64_t seed);

  Architecture architecture() const { return arch_; }
  const Hyperparameters& hyperparameters() const { return hp_; }
  std::uint64_t seed() const { return seed_; }

  std::unique_ptr<Trace> forward(std::span<const ModelInput* const> batch, Mode mode,
                                 Rng* rng) const {
    return net_->forward(batch, mode, rng);
  }
  Tensor predict(std::span<const ModelInput* const> batch) const;
  void backward(const Trace& trace, const Tensor& dprobs) { net_->backward(trace, dprobs); }
  void update_running_stats(const Trace& trace) { net_->update_running_stats(trace); }

  std::vector<Param*> params() { return net_->params(); }
  void zero_grad();
  // Parameters then buffers, in a fixed order; names are unique.
  std::vector<std::pair<std::string, Tensor*>> state();
  std::vector<std::pair<std::string, const Tensor*>> state() const;
  std::size_t parameter_count();
  void round_to_f32();

 private:
  Architecture arch_;
  Hyperparameters hp_;
  std::uint64_t seed_;
  std::unique_ptr<Network> net_;
};

}  // namespace hf
