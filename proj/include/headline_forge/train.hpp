#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "headline_forge/labeler.hpp"
#include "headline_forge/models.hpp"

namespace hf {

enum class LossKind { mse_soft, ce_hard };

std::string_view to_string(LossKind kind);
LossKind parse_loss(std::string_view name);

struct Sample {
  const ModelInput* input = nullptr;
  std::array<double, kIndicators> target{};
  int label = 0;  // 0-based hard label
};

Sample make_sample(const ModelInput& input, const LabeledExample& example);

struct TrainConfig {
  LossKind loss = LossKind::mse_soft;
  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t epochs = 100;
  std::size_t patience = 5;
  std::uint64_t seed = 7;
  // When positive, stop as soon as the validation loss falls below it.
  double target_val_loss = 0.0;
  // Round parameters to 32-bit floats once training ends, so the model is
  // exactly representable in a checkpoint.
  bool round_to_f32 = true;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;      // running mean over train-mode batches
  double val_loss = 0.0;        // infer mode
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

// Infer-mode loss averaged over samples.
double evaluate_loss(const Model& model, std::span<const Sample> samples, LossKind loss,
                     std::size_t batch = 64);
// Infer-mode predictions, [n, 4].
Tensor predict_all(const Model& model, std::span<const Sample> samples, std::size_t batch = 64);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch Adam with early stopping on validation loss; the parameters of
// the best validation epoch are restored at the end.
TrainResult train(Model& model, std::span<const Sample> train_set, std::span<const Sample> validation,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace hf
