#include "headline_forge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "headline_forge/error.hpp"
#include "headline_forge/rng.hpp"

namespace hf {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'H', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void bytes(std::string_view s) { out_.append(s); }
  void str(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  void tensor(std::string_view name, const Tensor& t) {
    str(name);
    put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(d);
    for (double v : t.values()) put<float>(static_cast<float>(v));
  }
  std::string& data() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return std::string(bytes(get<std::uint32_t>())); }
  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  std::pair<std::string, Tensor> tensor() {
    std::string name = str();
    const auto rank = get<std::uint32_t>();
    if (rank > 8) fail(ErrorCode::checkpoint_corrupt, "tensor " + name + " has rank " + std::to_string(rank));
    Shape shape;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(static_cast<std::size_t>(get<std::uint64_t>()));
      if (shape.back() != 0 && count > remaining() / shape.back()) {
        fail(ErrorCode::checkpoint_truncated, "tensor " + name + " extends past the end of its section");
      }
      count *= shape.back();
    }
    std::vector<double> values(count);
    need(count * sizeof(float));
    for (double& v : values) v = get<float>();
    return {std::move(name), Tensor(std::move(shape), std::move(values))};
  }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) fail(ErrorCode::checkpoint_truncated, "checkpoint ends unexpectedly");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::map<std::string, Tensor> read_tensors(std::string_view payload) {
  Reader r(payload);
  std::map<std::string, Tensor> out;
  while (r.remaining() > 0) {
    auto [name, t] = r.tensor();
    if (!out.emplace(name, std::move(t)).second)
      fail(ErrorCode::checkpoint_corrupt, "duplicate tensor " + name);
  }
  return out;
}

Tensor take(std::map<std::string, Tensor>& tensors, const std::string& name, const Shape& shape) {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail(ErrorCode::checkpoint_shape, "checkpoint lacks tensor " + name);
  if (it->second.shape() != shape) {
    fail(ErrorCode::checkpoint_shape, "tensor " + name + " has shape " + shape_string(it->second.shape()) +
                                          ", expected " + shape_string(shape));
  }
  Tensor t = std::move(it->second);
  tensors.erase(it);
  return t;
}

Tensor vector_tensor(const std::vector<double>& v) { return Tensor({v.size()}, v); }

Tensor matrix_tensor(const Eigen::MatrixXd& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.at(i, j) = m(i, j);
  return t;
}

Eigen::MatrixXd tensor_matrix(const Tensor& t) {
  Eigen::MatrixXd m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m(i, j) = t.at(i, j);
  return m;
}

json feature_config_json(const FeatureConfig& c) {
  return {{"headline_len", c.headline_len}, {"body_len", c.body_len},
          {"min_count", c.min_count},       {"max_vocab", c.max_vocab},
          {"topics", c.topics},             {"nnmf_iters", c.nnmf_iters},
          {"nnmf_tolerance", c.nnmf_tolerance}, {"transform_iters", c.transform_iters},
          {"doc_dim", c.doc_dim},           {"seed", c.seed}};
}

FeatureConfig feature_config_from(const json& j) {
  FeatureConfig c;
  c.headline_len = j.at("headline_len").get<std::size_t>();
  c.body_len = j.at("body_len").get<std::size_t>();
  c.min_count = j.at("min_count").get<std::size_t>();
  c.max_vocab = j.at("max_vocab").get<std::size_t>();
  c.topics = j.at("topics").get<std::size_t>();
  c.nnmf_iters = j.at("nnmf_iters").get<std::size_t>();
  c.nnmf_tolerance = j.at("nnmf_tolerance").get<double>();
  c.transform_iters = j.at("transform_iters").get<std::size_t>();
  c.doc_dim = j.at("doc_dim").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void TrainedModel::validate() const {
  require(model && features, ErrorCode::model_mismatch, "trained model is incomplete");
  const Hyperparameters& hp = model->hyperparameters();
  const FeaturePipeline& f = *features;
  auto check = [](bool ok, const std::string& what) {
    require(ok, ErrorCode::model_mismatch, "preprocessing does not match the model: " + what);
  };
  check(hp.vocab_size == f.vocab().size(), "vocabulary size");
  check(hp.headline_len == f.config().headline_len, "headline length");
  check(hp.body_len == f.config().body_len, "body length");
  check(hp.doc_dim == f.doc_dim(), "doc-vector dimension");
  check(hp.topics == f.config().topics, "topic count");
}

std::string serialize_checkpoint(const TrainedModel& trained) {
  trained.validate();
  const Model& model = *trained.model;
  const FeaturePipeline& f = *trained.features;

  json meta = {{"architecture", to_string(model.architecture())},
               {"hyperparameters", model.hyperparameters()},
               {"model_seed", model.seed()},
               {"features", feature_config_json(f.config())},
               {"headline_documents", f.headline_tfidf().documents()},
               {"body_documents", f.body_tfidf().documents()},
               {"vocab_fingerprint", f.vocab().fingerprint()},
               {"doc_vector_provider", f.provider().descriptor()},
               {"info", trained.info}};

  std::string vocab;
  for (const auto& t : f.vocab().regular_tokens()) {
    vocab += t;
    vocab += '\n';
  }

  Writer params;
  for (const auto& [name, t] : model.state()) params.tensor(name, *t);

  Writer pre;
  pre.tensor("headline_idf", vector_tensor(f.headline_tfidf().idf()));
  pre.tensor("body_idf", vector_tensor(f.body_tfidf().idf()));
  pre.tensor("headline_H", matrix_tensor(f.headline_topics().H));
  pre.tensor("body_H", matrix_tensor(f.body_topics().H));
  pre.tensor("doc_table", f.mean_provider().table());

  const std::pair<std::string_view, std::string*> sections[] = {
      {"meta", nullptr}, {"vocab", &vocab}, {"preprocess", &pre.data()}, {"params", &params.data()}};
  const std::string meta_text = meta.dump();

  Writer out;
  out.bytes(std::string_view(kMagic, sizeof kMagic));
  out.put<std::uint32_t>(kCheckpointVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(std::size(sections)));
  for (const auto& [name, payload] : sections) {
    const std::string_view body = payload ? std::string_view(*payload) : std::string_view(meta_text);
    out.str(name);
    out.put<std::uint64_t>(body.size());
    out.bytes(body);
  }
  out.put<std::uint64_t>(fnv1a64(out.data()));
  return std::move(out.data());
}

TrainedModel parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic) {
    if (std::string_view(kMagic, bytes.size()) == bytes)
      fail(ErrorCode::checkpoint_truncated, "checkpoint is truncated");
    fail(ErrorCode::checkpoint_format, "not a checkpoint file");
  }
  if (bytes.substr(0, sizeof kMagic) != std::string_view(kMagic, sizeof kMagic))
    fail(ErrorCode::checkpoint_format, "not a checkpoint file (bad magic)");
  Reader r(bytes);
  r.bytes(sizeof kMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::checkpoint_version, "checkpoint format version " + std::to_string(version) +
                                            " is not supported (expected " +
                                            std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.get<std::uint32_t>();
  if (count > 64) fail(ErrorCode::checkpoint_corrupt, "implausible section count");
  std::map<std::string, std::string_view> sections;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto len = r.get<std::uint64_t>();
    if (len > r.remaining()) fail(ErrorCode::checkpoint_truncated, "section " + name + " is truncated");
    sections[name] = r.bytes(static_cast<std::size_t>(len));
  }
  const std::size_t body_end = r.position();
  const auto stored = r.get<std::uint64_t>();
  if (r.remaining() != 0) fail(ErrorCode::checkpoint_corrupt, "trailing bytes after checkpoint");
  if (stored != fnv1a64(bytes.substr(0, body_end)))
    fail(ErrorCode::checkpoint_corrupt, "checkpoint checksum mismatch");
  for (const char* required : {"meta", "vocab", "preprocess", "params"})
    if (!sections.count(required))
      fail(ErrorCode::checkpoint_corrupt, std::string("checkpoint lacks section ") + required);

  json meta = json::parse(sections["meta"], nullptr, false);
  if (meta.is_discarded() || !meta.is_object())
    fail(ErrorCode::checkpoint_corrupt, "checkpoint metadata is not valid JSON");

  try {
    const Architecture arch = parse_architecture(meta.at("architecture").get<std::string>());
    const Hyperparameters hp = meta.at("hyperparameters").get<Hyperparameters>();
    const FeatureConfig fc = feature_config_from(meta.at("features"));

    std::vector<std::string> tokens;
    std::string_view vocab_text = sections["vocab"];
    for (std::size_t start = 0; start < vocab_text.size();) {
      const std::size_t end = vocab_text.find('\n', start);
      if (end == std::string_view::npos) fail(ErrorCode::checkpoint_corrupt, "vocabulary is not newline-terminated");
      tokens.emplace_back(vocab_text.substr(start, end - start));
      start = end + 1;
    }
    Vocabulary vocab = Vocabulary::from_tokens(tokens);
    if (vocab.fingerprint() != meta.at("vocab_fingerprint").get<std::uint64_t>())
      fail(ErrorCode::checkpoint_corrupt, "vocabulary fingerprint mismatch");
    const std::size_t v = vocab.size();

    auto pre = read_tensors(sections["preprocess"]);
    Tensor hidf = take(pre, "headline_idf", {v});
    Tensor bidf = take(pre, "body_idf", {v});
    Tensor hH = take(pre, "headline_H", {fc.topics, v});
    Tensor bH = take(pre, "body_H", {fc.topics, v});
    Tensor table = take(pre, "doc_table", {v, hp.doc_dim});
    if (!pre.empty()) fail(ErrorCode::checkpoint_shape, "unexpected preprocessing tensor " + pre.begin()->first);

    TopicModel htop{tensor_matrix(hH), {}, vocab.fingerprint()};
    TopicModel btop{tensor_matrix(bH), {}, vocab.fingerprint()};
    auto features = std::make_shared<FeaturePipeline>(
        fc, std::move(vocab), TfidfModel(hidf.storage(), meta.at("headline_documents").get<std::size_t>()),
        TfidfModel(bidf.storage(), meta.at("body_documents").get<std::size_t>()), std::move(htop),
        std::move(btop), std::make_shared<MeanEmbeddingProvider>(std::move(table)));

    auto model = std::make_shared<Model>(arch, hp, meta.at("model_seed").get<std::uint64_t>());
    auto params = read_tensors(sections["params"]);
    for (auto& [name, t] : model->state()) *t = take(params, name, t->shape());
    if (!params.empty()) fail(ErrorCode::checkpoint_shape, "unexpected parameter tensor " + params.begin()->first);

    TrainedModel out;
    out.model = std::move(model);
    out.features = std::move(features);
    out.info = meta.value("info", json::object());
    try {
      out.validate();
    } catch (const Error& e) {
      fail(ErrorCode::checkpoint_shape, e.what());
    }
    return out;
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::checkpoint_format:
      case ErrorCode::checkpoint_version:
      case ErrorCode::checkpoint_truncated:
      case ErrorCode::checkpoint_shape:
      case ErrorCode::checkpoint_corrupt:
        throw;
      default:
        fail(ErrorCode::checkpoint_shape, std::string("checkpoint does not describe a valid model: ") + e.what());
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::checkpoint_corrupt, std::string("checkpoint metadata: ") + e.what());
  }
}

void save_checkpoint(const TrainedModel& trained, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(trained);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace hf
