#pragma once

#include <memory>
#include <vector>

#include "headline_forge/checkpoint.hpp"
#include "headline_forge/experiment.hpp"
#include "headline_forge/features.hpp"
#include "headline_forge/models.hpp"
#include "headline_forge/synth.hpp"

namespace hf::testing {

inline FeatureConfig small_features() {
  FeatureConfig c;
  c.headline_len = 8;
  c.body_len = 24;
  c.min_count = 1;
  c.topics = 4;
  c.nnmf_iters = 40;
  c.transform_iters = 40;
  c.doc_dim = 12;
  c.seed = 3;
  return c;
}

inline Hyperparameters small_hyperparameters(const FeaturePipeline& f) {
  Hyperparameters hp = hyperparameters_for(f);
  hp.embed_dim = 12;
  hp.conv_filters = {3, 4, 4};
  hp.similarity_dim = 10;
  hp.doc_out = 8;
  hp.head_hidden1 = 16;
  hp.head_hidden2 = 8;
  hp.cnn_filters = 6;
  hp.rnn_hidden = 5;
  return hp;
}

// A small labeled world with features fitted on all of it.
struct Fixture {
  SyntheticWorld world;
  LabeledCorpus corpus;
  std::shared_ptr<const FeaturePipeline> features;
  std::vector<ModelInput> inputs;

  explicit Fixture(std::size_t n = 60, double events = 30, std::uint64_t seed = 3)
      : world(generate_synthetic(n, events, seed)) {
    corpus = join_labels(world.corpus, label_synthetic(world, NoiseFilter{}, 99.0));
    features = std::make_shared<const FeaturePipeline>(
        FeaturePipeline::fit(corpus.docs, small_features()));
    inputs = features->featurize(corpus.docs);
  }

  std::shared_ptr<TrainedModel> trained(Architecture arch, std::uint64_t seed = 5) const {
    auto model = std::make_shared<Model>(arch, small_hyperparameters(*features), seed);
    model->round_to_f32();
    auto t = std::make_shared<TrainedModel>();
    t->model = model;
    t->features = features;
    t->info = {{"seed", seed}};
    return t;
  }
};

}  // namespace hf::testing
