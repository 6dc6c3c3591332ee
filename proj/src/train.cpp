#include "headline_forge/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "headline_forge/adam.hpp"
#include "headline_forge/error.hpp"
#include "headline_forge/losses.hpp"

namespace hf {

namespace {

std::vector<const ModelInput*> inputs_of(std::span<const Sample> samples) {
  std::vector<const ModelInput*> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(s.input);
  return out;
}

LossResult batch_loss(const Tensor& probs, std::span<const Sample> samples, LossKind kind) {
  if (kind == LossKind::mse_soft) {
    Tensor target({samples.size(), kIndicators});
    for (std::size_t i = 0; i < samples.size(); ++i)
      std::copy(samples[i].target.begin(), samples[i].target.end(), target.row(i).begin());
    return mse(probs, target);
  }
  std::vector<int> labels;
  for (const Sample& s : samples) labels.push_back(s.label);
  return cross_entropy(probs, labels);
}

// Contiguous chunks of `order`; a trailing singleton joins the previous chunk
// because batch normalization needs two rows.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch) out.emplace_back(start, std::min(n, start + batch));
  if (out.size() >= 2 && out.back().second - out.back().first == 1) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

}  // namespace

std::string_view to_string(LossKind kind) {
  return kind == LossKind::mse_soft ? "mse_soft" : "ce_hard";
}

LossKind parse_loss(std::string_view name) {
  if (name == "mse_soft") return LossKind::mse_soft;
  if (name == "ce_hard") return LossKind::ce_hard;
  fail(ErrorCode::config, "unknown loss '" + std::string(name) + "' (mse_soft or ce_hard)");
}

Sample make_sample(const ModelInput& input, const LabeledExample& example) {
  Sample s;
  s.input = &input;
  s.target = example.target.p;
  s.label = example.hard_label - 1;
  return s;
}

Tensor predict_all(const Model& model, std::span<const Sample> samples, std::size_t batch) {
  Tensor out({samples.size(), kIndicators});
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    auto chunk = samples.subspan(start, std::min(batch, samples.size() - start));
    auto inputs = inputs_of(chunk);
    Tensor p = model.predict(inputs);
    std::copy(p.values().begin(), p.values().end(), out.data() + start * kIndicators);
  }
  return out;
}

double evaluate_loss(const Model& model, std::span<const Sample> samples, LossKind loss,
                     std::size_t batch) {
  require(!samples.empty(), ErrorCode::config, "cannot evaluate on an empty set");
  double total = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    auto chunk = samples.subspan(start, std::min(batch, samples.size() - start));
    auto inputs = inputs_of(chunk);
    total += batch_loss(model.predict(inputs), chunk, loss).value * static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(samples.size());
}

TrainResult train(Model& model, std::span<const Sample> train_set, std::span<const Sample> validation,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  require(!train_set.empty(), ErrorCode::config, "training split is empty");
  require(!validation.empty(), ErrorCode::config, "validation split is empty");
  require(config.batch >= 2, ErrorCode::config, "batch size must be at least 2");
  require(config.epochs >= 1, ErrorCode::config, "epochs must be positive");
  require(config.lr > 0.0, ErrorCode::config, "learning rate must be positive");

  AdamConfig adam_config;
  adam_config.lr = config.lr;
  Adam adam(adam_config);
  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  Rng dropout_rng(derive_seed(config.seed, "dropout"));
  auto params = model.params();
  auto state = model.state();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto ranges = batch_ranges(order.size(), config.batch);

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double running = 0.0;
    for (auto [lo, hi] : ranges) {
      std::vector<Sample> chunk;
      for (std::size_t i = lo; i < hi; ++i) chunk.push_back(train_set[order[i]]);
      auto inputs = inputs_of(chunk);
      model.zero_grad();
      auto trace = model.forward(inputs, Mode::train, &dropout_rng);
      LossResult loss = batch_loss(trace->probs, chunk, config.loss);
      if (!std::isfinite(loss.value)) {
        fail(ErrorCode::diverged, "loss became " + std::to_string(loss.value) + " in epoch " +
                                      std::to_string(epoch) + "; lower the learning rate");
      }
      model.backward(*trace, loss.grad);
      model.update_running_stats(*trace);
      adam.step(params);
      running += loss.value * static_cast<double>(chunk.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = running / static_cast<double>(train_set.size());
    rec.val_loss = evaluate_loss(model, validation, config.loss);
    require(std::isfinite(rec.val_loss), ErrorCode::diverged,
            "validation loss is not finite in epoch " + std::to_string(epoch));
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      best.clear();
      for (auto& [name, t] : state) best.push_back(*t);
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.stopped_early = true;
      break;
    }
    if (config.target_val_loss > 0.0 && rec.val_loss < config.target_val_loss) break;
  }

  if (!best.empty()) {
    for (std::size_t i = 0; i < state.size(); ++i) *state[i].second = best[i];
  }
  if (config.round_to_f32) model.round_to_f32();
  return result;
}

}  // namespace hf
