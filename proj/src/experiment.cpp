#include "headline_forge/experiment.hpp"

#include <chrono>
#include <fstream>
#include <unordered_map>

#include <toml.hpp>

#include "headline_forge/error.hpp"
#include "headline_forge/metrics.hpp"

namespace hf {

using nlohmann::json;

namespace {

template <typename T>
void read_value(const toml::table& t, std::string_view key, T& out) {
  if (const toml::node* n = t.get(key)) {
    if (auto v = n->value<T>()) out = *v;
    else fail(ErrorCode::config, "config key '" + std::string(key) + "' has the wrong type");
  }
}

void read_size(const toml::table& t, std::string_view key, std::size_t& out) {
  std::int64_t v = static_cast<std::int64_t>(out);
  read_value(t, key, v);
  require(v >= 0, ErrorCode::config, "config key '" + std::string(key) + "' must be nonnegative");
  out = static_cast<std::size_t>(v);
}

void read_seed(const toml::table& t, std::string_view key, std::uint64_t& out) {
  std::int64_t v = static_cast<std::int64_t>(out);
  read_value(t, key, v);
  require(v >= 0, ErrorCode::config, "config key '" + std::string(key) + "' must be nonnegative");
  out = static_cast<std::uint64_t>(v);
}

std::optional<std::filesystem::path> read_path(const toml::table& t, std::string_view key,
                                               const std::filesystem::path& base) {
  std::string s;
  read_value(t, key, s);
  if (s.empty()) return std::nullopt;
  std::filesystem::path p(s);
  return p.is_relative() ? base / p : p;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Tensor truths_of(std::span<const Sample> samples) {
  Tensor out({samples.size(), kIndicators});
  for (std::size_t i = 0; i < samples.size(); ++i)
    std::copy(samples[i].target.begin(), samples[i].target.end(), out.row(i).begin());
  return out;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    fail(ErrorCode::config, path.string() + ": " + std::string(e.description()));
  }
  const auto base = path.parent_path();
  ExperimentConfig c;
  read_seed(root, "seed", c.seed);
  read_value(root, "one_hot_targets", c.one_hot_targets);
  if (auto* archs = root["architectures"].as_array()) {
    c.architectures.clear();
    for (const auto& a : *archs) {
      auto name = a.value<std::string>();
      require(name.has_value(), ErrorCode::config, "architectures must be strings");
      c.architectures.push_back(parse_architecture(*name));
    }
  }
  if (auto* losses = root["losses"].as_array()) {
    c.losses.clear();
    for (const auto& l : *losses) {
      auto name = l.value<std::string>();
      require(name.has_value(), ErrorCode::config, "losses must be strings");
      c.losses.push_back(parse_loss(*name));
    }
  }
  if (auto* data = root["data"].as_table()) {
    c.corpus = read_path(*data, "corpus", base);
    c.labels = read_path(*data, "labels", base);
    read_size(*data, "synthetic_n", c.synthetic_n);
    read_value(*data, "synthetic_events_mean", c.synthetic_events_mean);
    read_seed(*data, "synthetic_seed", c.synthetic_seed);
    read_value(*data, "cap_seconds", c.noise.cap_seconds);
    read_value(*data, "floor_seconds", c.noise.floor_seconds);
    read_value(*data, "clip_percentile", c.clip_percentile);
    c.word_vectors = read_path(*data, "word_vectors", base);
    c.doc_vectors = read_path(*data, "doc_vectors", base);
  }
  if (auto* tr = root["train"].as_table()) {
    read_value(*tr, "lr", c.train.lr);
    read_size(*tr, "batch", c.train.batch);
    read_size(*tr, "epochs", c.train.epochs);
    read_size(*tr, "patience", c.train.patience);
  }
  if (auto* f = root["features"].as_table()) {
    read_size(*f, "headline_len", c.features.headline_len);
    read_size(*f, "body_len", c.features.body_len);
    read_size(*f, "min_count", c.features.min_count);
    read_size(*f, "max_vocab", c.features.max_vocab);
    read_size(*f, "topics", c.features.topics);
    read_size(*f, "nnmf_iters", c.features.nnmf_iters);
    read_size(*f, "doc_dim", c.features.doc_dim);
  }
  require(!c.architectures.empty(), ErrorCode::config, "no architectures requested");
  require(!c.losses.empty(), ErrorCode::config, "no losses requested");
  require(c.corpus.has_value() == c.labels.has_value(), ErrorCode::config,
          "data.corpus and data.labels must be given together");
  return c;
}

json to_json(const ExperimentConfig& c) {
  json archs = json::array(), losses = json::array();
  for (Architecture a : c.architectures) archs.push_back(to_string(a));
  for (LossKind l : c.losses) losses.push_back(to_string(l));
  json data;
  if (c.corpus) {
    data = {{"corpus", c.corpus->string()}, {"labels", c.labels->string()}};
  } else {
    data = {{"synthetic_n", c.synthetic_n},
            {"synthetic_events_mean", c.synthetic_events_mean},
            {"synthetic_seed", c.synthetic_seed},
            {"cap_seconds", c.noise.cap_seconds},
            {"floor_seconds", c.noise.floor_seconds},
            {"clip_percentile", c.clip_percentile}};
  }
  return {{"seed", c.seed},
          {"architectures", archs},
          {"losses", losses},
          {"one_hot_targets", c.one_hot_targets},
          {"data", data},
          {"train",
           {{"lr", c.train.lr}, {"batch", c.train.batch}, {"epochs", c.train.epochs},
            {"patience", c.train.patience}}},
          {"features",
           {{"headline_len", c.features.headline_len}, {"body_len", c.features.body_len},
            {"min_count", c.features.min_count}, {"max_vocab", c.features.max_vocab},
            {"topics", c.features.topics}, {"nnmf_iters", c.features.nnmf_iters},
            {"doc_dim", c.features.doc_dim}}}};
}

std::vector<LabeledExample> label_synthetic(const SyntheticWorld& world, const NoiseFilter& noise,
                                            double clip_percentile) {
  AggregateMap all;
  for_each_article_events(world, [&](std::span<const PageViewEvent> events) {
    auto kept = filter_noise(std::vector<PageViewEvent>(events.begin(), events.end()), noise);
    for (auto& [id, agg] : aggregate_engagement(kept)) all.emplace(id, agg);
  });
  return label_corpus(all, clip_percentile);
}

LabeledCorpus join_labels(std::vector<Document> docs, const std::vector<LabeledExample>& labels) {
  std::unordered_map<std::string, const LabeledExample*> by_id;
  for (const auto& l : labels) by_id.emplace(l.article_id, &l);
  LabeledCorpus out;
  for (auto& d : docs) {
    auto it = by_id.find(d.article_id);
    if (it == by_id.end()) continue;
    out.labels.push_back(*it->second);
    out.docs.push_back(std::move(d));
  }
  require(!out.docs.empty(), ErrorCode::config, "no corpus article has a label");
  return out;
}

LabeledCorpus load_labeled_corpus(const ExperimentConfig& config) {
  if (config.corpus) {
    std::ifstream corpus_in(*config.corpus);
    if (!corpus_in) fail(ErrorCode::io, "cannot open corpus " + config.corpus->string());
    std::ifstream labels_in(*config.labels);
    if (!labels_in) fail(ErrorCode::io, "cannot open labels " + config.labels->string());
    return join_labels(read_corpus(corpus_in), read_labels(labels_in));
  }
  SyntheticWorld world =
      generate_synthetic(config.synthetic_n, config.synthetic_events_mean, config.synthetic_seed);
  auto labels = label_synthetic(world, config.noise, config.clip_percentile);
  return join_labels(std::move(world.corpus), labels);
}

PreparedData prepare_data(const LabeledCorpus& corpus, const ExperimentConfig& config) {
  PreparedData data;
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
    ids.push_back(corpus.docs[i].article_id);
    require(index.emplace(ids.back(), i).second, ErrorCode::config,
            "duplicate article id " + ids.back());
  }
  data.split = split_corpus(ids, config.seed);

  std::vector<Document> train_docs;
  for (const auto& id : data.split.train) train_docs.push_back(corpus.docs[index.at(id)]);
  FeatureConfig fc = config.features;
  fc.seed = config.seed;
  std::optional<WordVectors> wv;
  if (config.word_vectors) wv = load_word_vectors(*config.word_vectors);
  data.features = std::make_unique<FeaturePipeline>(
      FeaturePipeline::fit(train_docs, fc, wv ? &*wv : nullptr, config.doc_vectors));
  data.inputs = data.features->featurize(corpus.docs);

  data.labels = corpus.labels;
  if (config.one_hot_targets) {
    for (auto& l : data.labels) {
      l.target.p.fill(0.0);
      l.target.p[static_cast<std::size_t>(l.hard_label - 1)] = 1.0;
    }
  }
  auto samples_for = [&](const std::vector<std::string>& part) {
    std::vector<Sample> out;
    for (const auto& id : part) {
      const std::size_t i = index.at(id);
      out.push_back(make_sample(data.inputs[i], data.labels[i]));
    }
    return out;
  };
  data.train = samples_for(data.split.train);
  data.validation = samples_for(data.split.validation);
  data.test = samples_for(data.split.test);
  return data;
}

ReportRow run_architecture(const PreparedData& data, Architecture arch, LossKind loss,
                           const ExperimentConfig& config, std::unique_ptr<Model>* trained,
                           const ProgressFn& progress) {
  const auto start = std::chrono::steady_clock::now();
  auto model = std::make_unique<Model>(arch, hyperparameters_for(*data.features), config.seed);
  TrainConfig tc = config.train;
  tc.loss = loss;
  tc.seed = config.seed;
  const std::string tag = std::string(to_string(arch)) + "/" + std::string(to_string(loss));
  TrainResult result = train(*model, data.train, data.validation, tc, [&](const EpochRecord& r) {
    if (progress) {
      progress(tag + " epoch " + std::to_string(r.epoch) + " train " + std::to_string(r.train_loss) +
               " val " + std::to_string(r.val_loss));
    }
  });
  ReportRow row;
  row.architecture = std::string(to_string(arch));
  row.loss = std::string(to_string(loss));
  const Tensor truths = truths_of(data.test);
  const Tensor preds = predict_all(*model, data.test);
  row.mae = mae(preds, truths);
  row.rae = rae(preds, truths);
  row.epochs_run = result.history.size();
  row.best_epoch = result.best_epoch;
  row.best_val_loss = result.best_val_loss;
  row.seconds = seconds_since(start);
  if (trained) *trained = std::move(model);
  return row;
}

const ReportRow* EvalReport::find(std::string_view architecture, std::string_view loss) const {
  for (const auto& r : rows)
    if (r.architecture == architecture && (r.loss == loss || r.loss.empty())) return &r;
  return nullptr;
}

json to_json(const EvalReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json j = {{"architecture", r.architecture}, {"mae", r.mae}, {"rae", r.rae}};
    if (!r.loss.empty()) {
      j["loss"] = r.loss;
      j["epochs_run"] = r.epochs_run;
      j["best_epoch"] = r.best_epoch;
      j["best_val_loss"] = r.best_val_loss;
      j["seconds"] = r.seconds;
    }
    rows.push_back(j);
  }
  return {{"seed", report.seed},
          {"split",
           {{"train", report.train_size},
            {"validation", report.validation_size},
            {"test", report.test_size}}},
          {"rows", rows},
          {"config", report.config}};
}

EvalReport run_experiment(const LabeledCorpus& corpus, const ExperimentConfig& config,
                          const ProgressFn& progress) {
  PreparedData data = prepare_data(corpus, config);
  EvalReport report;
  report.seed = config.seed;
  report.train_size = data.train.size();
  report.validation_size = data.validation.size();
  report.test_size = data.test.size();
  report.config = to_json(config);
  for (Architecture arch : config.architectures)
    for (LossKind loss : config.losses)
      report.rows.push_back(run_architecture(data, arch, loss, config, nullptr, progress));
  const Tensor truths = truths_of(data.test);
  const Tensor base = mean_predictor(truths);
  ReportRow mean_row;
  mean_row.architecture = "mean_predictor";
  mean_row.mae = mae(base, truths);
  mean_row.rae = rae(base, truths);
  report.rows.push_back(mean_row);
  return report;
}

EvalReport run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
  return run_experiment(load_labeled_corpus(config), config, progress);
}

}  // namespace hf
