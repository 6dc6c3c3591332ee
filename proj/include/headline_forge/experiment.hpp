#pragma once

// Train-and-compare protocol: one seeded 70/10/20 split shared by every
// architecture, features fitted on the training part, metrics on the test part.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "headline_forge/features.hpp"
#include "headline_forge/ingest.hpp"
#include "headline_forge/labeler.hpp"
#include "headline_forge/models.hpp"
#include "headline_forge/synth.hpp"
#include "headline_forge/train.hpp"

namespace hf {

struct ExperimentConfig {
  // Data: either files or a synthetic world.
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> labels;
  std::size_t synthetic_n = 2000;
  double synthetic_events_mean = 1000.0;
  std::uint64_t synthetic_seed = 7;
  NoiseFilter noise;
  double clip_percentile = 99.0;

  std::vector<Architecture> architectures = {Architecture::proposed,
                                             Architecture::proposed_no_similarity};
  std::vector<LossKind> losses = {LossKind::mse_soft};
  // Replace every soft target by the one-hot vector of its hard label.
  bool one_hot_targets = false;
  std::uint64_t seed = 7;
  TrainConfig train;
  FeatureConfig features;
  std::optional<std::filesystem::path> word_vectors;
  std::optional<std::filesystem::path> doc_vectors;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

// Labeled documents: the corpus restricted to articles that have labels, in
// corpus order.
struct LabeledCorpus {
  std::vector<Document> docs;
  std::vector<LabeledExample> labels;
};

// Events -> noise filter -> aggregates -> labels over a synthetic world.
std::vector<LabeledExample> label_synthetic(const SyntheticWorld& world, const NoiseFilter& noise,
                                            double clip_percentile);
LabeledCorpus join_labels(std::vector<Document> docs, const std::vector<LabeledExample>& labels);
LabeledCorpus load_labeled_corpus(const ExperimentConfig& config);

// A split corpus with fitted features, ready for training.
struct PreparedData {
  CorpusSplit split;
  std::unique_ptr<FeaturePipeline> features;
  std::vector<ModelInput> inputs;        // aligned with the labeled corpus
  std::vector<LabeledExample> labels;
  std::vector<Sample> train, validation, test;
};

PreparedData prepare_data(const LabeledCorpus& corpus, const ExperimentConfig& config);

struct ReportRow {
  std::string architecture;
  std::string loss;
  double mae = 0.0;
  double rae = 0.0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double seconds = 0.0;
};

struct EvalReport {
  std::uint64_t seed = 0;
  std::size_t train_size = 0, validation_size = 0, test_size = 0;
  std::vector<ReportRow> rows;
  nlohmann::json config;

  const ReportRow* find(std::string_view architecture, std::string_view loss = "mse_soft") const;
};

nlohmann::json to_json(const EvalReport& report);

using ProgressFn = std::function<void(const std::string&)>;

// Trains one model of `arch` on prepared data and scores it on the test split.
ReportRow run_architecture(const PreparedData& data, Architecture arch, LossKind loss,
                           const ExperimentConfig& config,
                           std::unique_ptr<Model>* trained = nullptr,
                           const ProgressFn& progress = {});

EvalReport run_experiment(const ExperimentConfig& config, const ProgressFn& progress = {});
EvalReport run_experiment(const LabeledCorpus& corpus, const ExperimentConfig& config,
                          const ProgressFn& progress = {});

}  // namespace hf
