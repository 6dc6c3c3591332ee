#pragma once

// Text -> model input: vocabulary, per-field TF-IDF and topic models, and the
// doc-vector provider, all fitted on training documents only.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "headline_forge/docvec.hpp"
#include "headline_forge/textprep.hpp"
#include "headline_forge/topics.hpp"

namespace hf {

struct FeatureConfig {
  std::size_t headline_len = 20;
  std::size_t body_len = 200;
  std::size_t min_count = 2;
  std::size_t max_vocab = 50000;
  std::size_t topics = 50;
  std::size_t nnmf_iters = 200;
  double nnmf_tolerance = 1e-5;
  std::size_t transform_iters = 200;
  std::size_t doc_dim = 100;
  std::uint64_t seed = 7;
};

struct BodyFeatures {
  EncodedText body;
  std::vector<double> doc;
  std::vector<double> topics;
  SparseVector tfidf;
};

struct ModelInput {
  EncodedText headline;
  EncodedText body;
  std::vector<double> headline_doc;
  std::vector<double> body_doc;
  std::vector<double> headline_topics;
  std::vector<double> body_topics;
  SparseVector headline_tfidf;
  SparseVector body_tfidf;
};

class FeaturePipeline {
 public:
  FeaturePipeline(FeatureConfig config, Vocabulary vocab, TfidfModel headline_tfidf,
                  TfidfModel body_tfidf, TopicModel headline_topics, TopicModel body_topics,
                  std::shared_ptr<const MeanEmbeddingProvider> mean_provider,
                  std::shared_ptr<const DocVectorProvider> provider = nullptr);

  // `doc_vectors` optionally names a file of precomputed vectors; documents
  // it lacks fall back to the mean-embedding provider.
  static FeaturePipeline fit(std::span<const Document> train, const FeatureConfig& config,
                             const WordVectors* pretrained = nullptr,
                             const std::optional<std::filesystem::path>& doc_vectors = std::nullopt);

  ModelInput featurize(const Document& doc) const;
  std::vector<ModelInput> featurize(std::span<const Document> docs) const;

  // Body side computed once, then combined with any number of headlines.
  BodyFeatures featurize_body(std::string_view body) const;
  ModelInput with_headline(const BodyFeatures& body, std::string_view headline) const;

  const FeatureConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const TfidfModel& headline_tfidf() const { return headline_tfidf_; }
  const TfidfModel& body_tfidf() const { return body_tfidf_; }
  const TopicModel& headline_topics() const { return headline_topics_; }
  const TopicModel& body_topics() const { return body_topics_; }
  const MeanEmbeddingProvider& mean_provider() const { return *mean_provider_; }
  const DocVectorProvider& provider() const { return *provider_; }
  std::size_t doc_dim() const { return provider_->dimension(); }

 private:
  FeatureConfig config_;
  Vocabulary vocab_;
  TfidfModel headline_tfidf_;
  TfidfModel body_tfidf_;
  TopicModel headline_topics_;
  TopicModel body_topics_;
  std::shared_ptr<const MeanEmbeddingProvider> mean_provider_;
  std::shared_ptr<const DocVectorProvider> provider_;
};

}  // namespace hf
