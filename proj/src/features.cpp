#include "headline_forge/features.hpp"

#include "headline_forge/error.hpp"
#include "headline_forge/rng.hpp"

namespace hf {

namespace {

float to_f32(double v) { return static_cast<float>(v); }

// Fitted state is kept at 32-bit precision so a saved checkpoint reproduces
// preprocessing exactly.
void round_vector(std::vector<double>& v) {
  for (double& x : v) x = to_f32(x);
}

TopicModel fit_topics(std::span<const std::vector<std::int32_t>> ids, const TfidfModel& tfidf,
                      const FeatureConfig& config, std::string_view stream,
                      std::uint64_t fingerprint) {
  std::vector<SparseVector> rows;
  rows.reserve(ids.size());
  for (const auto& doc : ids) rows.push_back(tfidf.transform(doc));
  NnmfOptions options;
  options.topics = config.topics;
  options.max_iters = config.nnmf_iters;
  options.tolerance = config.nnmf_tolerance;
  options.seed = derive_seed(config.seed, stream);
  TopicModel model = nnmf_fit(tfidf_matrix(rows, tfidf.vocab_size()), options).model;
  model.H = model.H.cast<float>().cast<double>();
  model.vocab_fingerprint = fingerprint;
  return model;
}

}  // namespace

FeaturePipeline::FeaturePipeline(FeatureConfig config, Vocabulary vocab, TfidfModel headline_tfidf,
                                 TfidfModel body_tfidf, TopicModel headline_topics,
                                 TopicModel body_topics,
                                 std::shared_ptr<const MeanEmbeddingProvider> mean_provider,
                                 std::shared_ptr<const DocVectorProvider> provider)
    : config_(config),
      vocab_(std::move(vocab)),
      headline_tfidf_(std::move(headline_tfidf)),
      body_tfidf_(std::move(body_tfidf)),
      headline_topics_(std::move(headline_topics)),
      body_topics_(std::move(body_topics)),
      mean_provider_(std::move(mean_provider)),
      provider_(provider ? std::move(provider) : mean_provider_) {
  require(mean_provider_ != nullptr, ErrorCode::config, "feature pipeline needs a doc-vector provider");
  const std::size_t v = vocab_.size();
  require(headline_tfidf_.vocab_size() == v && body_tfidf_.vocab_size() == v, ErrorCode::shape,
          "idf length differs from vocabulary size");
  require(headline_topics_.vocab_size() == v && body_topics_.vocab_size() == v, ErrorCode::shape,
          "topic matrix width differs from vocabulary size");
  require(headline_topics_.topics() == config_.topics && body_topics_.topics() == config_.topics,
          ErrorCode::shape, "topic count differs from configuration");
  require(mean_provider_->table().dim(0) == v, ErrorCode::shape,
          "doc-vector table rows differ from vocabulary size");
}

FeaturePipeline FeaturePipeline::fit(std::span<const Document> train, const FeatureConfig& config,
                                     const WordVectors* pretrained,
                                     const std::optional<std::filesystem::path>& doc_vectors) {
  require(!train.empty(), ErrorCode::config, "cannot fit features on an empty corpus");
  require(config.headline_len >= 1 && config.body_len >= 1 && config.topics >= 1,
          ErrorCode::config, "feature lengths and topic count must be positive");
  std::vector<std::vector<std::string>> headline_tokens, body_tokens, all_tokens;
  for (const Document& doc : train) {
    headline_tokens.push_back(tokenize(doc.headline));
    body_tokens.push_back(tokenize(doc.body));
    auto joined = headline_tokens.back();
    joined.insert(joined.end(), body_tokens.back().begin(), body_tokens.back().end());
    all_tokens.push_back(std::move(joined));
  }
  Vocabulary vocab = Vocabulary::build(all_tokens, config.min_count, config.max_vocab);

  std::vector<std::vector<std::int32_t>> headline_ids, body_ids;
  for (std::size_t i = 0; i < train.size(); ++i) {
    headline_ids.push_back(to_ids(headline_tokens[i], vocab));
    body_ids.push_back(to_ids(body_tokens[i], vocab));
  }
  TfidfModel htf = TfidfModel::fit(headline_ids, vocab.size());
  TfidfModel btf = TfidfModel::fit(body_ids, vocab.size());
  auto hidf = htf.idf(), bidf = btf.idf();
  round_vector(hidf);
  round_vector(bidf);
  htf = TfidfModel(std::move(hidf), htf.documents());
  btf = TfidfModel(std::move(bidf), btf.documents());

  TopicModel htop = fit_topics(headline_ids, htf, config, "topics.headline", vocab.fingerprint());
  TopicModel btop = fit_topics(body_ids, btf, config, "topics.body", vocab.fingerprint());

  std::size_t dim = config.doc_dim;
  if (doc_vectors) dim = FileDocVectorProvider::peek_dimension(*doc_vectors);
  auto mean = std::make_shared<MeanEmbeddingProvider>(
      MeanEmbeddingProvider::create(vocab, dim, config.seed, pretrained));
  round_to_f32(mean->table());
  std::shared_ptr<const DocVectorProvider> provider;
  if (doc_vectors) provider = std::make_shared<FileDocVectorProvider>(*doc_vectors, mean);

  FeatureConfig stored = config;
  stored.doc_dim = dim;
  return FeaturePipeline(stored, std::move(vocab), std::move(htf), std::move(btf), std::move(htop),
                         std::move(btop), std::move(mean), std::move(provider));
}

BodyFeatures FeaturePipeline::featurize_body(std::string_view body) const {
  auto tokens = tokenize(body);
  auto ids = to_ids(tokens, vocab_);
  BodyFeatures out;
  out.body = encode(tokens, vocab_, config_.body_len);
  out.doc = provider_->vector_for({}, TextField::body, ids);
  out.tfidf = body_tfidf_.transform(ids);
  out.topics = nnmf_transform(out.tfidf, body_topics_, config_.transform_iters);
  return out;
}

ModelInput FeaturePipeline::with_headline(const BodyFeatures& body, std::string_view headline) const {
  auto tokens = tokenize(headline);
  auto ids = to_ids(tokens, vocab_);
  ModelInput in;
  in.headline = encode(tokens, vocab_, config_.headline_len);
  in.headline_doc = provider_->vector_for({}, TextField::headline, ids);
  in.headline_tfidf = headline_tfidf_.transform(ids);
  in.headline_topics = nnmf_transform(in.headline_tfidf, headline_topics_, config_.transform_iters);
  in.body = body.body;
  in.body_doc = body.doc;
  in.body_topics = body.topics;
  in.body_tfidf = body.tfidf;
  return in;
}

ModelInput FeaturePipeline::featurize(const Document& doc) const {
  auto htokens = tokenize(doc.headline);
  auto btokens = tokenize(doc.body);
  auto hids = to_ids(htokens, vocab_);
  auto bids = to_ids(btokens, vocab_);
  ModelInput in;
  in.headline = encode(htokens, vocab_, config_.headline_len);
  in.body = encode(btokens, vocab_, config_.body_len);
  in.headline_doc = provider_->vector_for(doc.article_id, TextField::headline, hids);
  in.body_doc = provider_->vector_for(doc.article_id, TextField::body, bids);
  in.headline_tfidf = headline_tfidf_.transform(hids);
  in.body_tfidf = body_tfidf_.transform(bids);
  in.headline_topics = nnmf_transform(in.headline_tfidf, headline_topics_, config_.transform_iters);
  in.body_topics = nnmf_transform(in.body_tfidf, body_topics_, config_.transform_iters);
  return in;
}

std::vector<ModelInput> FeaturePipeline::featurize(std::span<const Document> docs) const {
  std::vector<ModelInput> out;
  out.reserve(docs.size());
  for (const Document& d : docs) out.push_back(featurize(d));
  return out;
}

}  // namespace hf
