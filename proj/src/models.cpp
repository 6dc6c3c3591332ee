#include "headline_forge/models.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "headline_forge/conv.hpp"
#include "headline_forge/error.hpp"
#include "headline_forge/labeler.hpp"
#include "headline_forge/recurrent.hpp"

namespace hf {

using nlohmann::json;

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::string_view kArchNames[] = {
    "proposed", "proposed_no_similarity", "tfidf_ffnn",
    "emb_cnn1d_ffnn", "emb_bgru_ffnn", "emb_blstm_ffnn",
};

Rng component_rng(std::uint64_t seed, std::string_view component) {
  return Rng(derive_seed(seed, component));
}

void check_batch(std::span<const ModelInput* const> batch) {
  require(!batch.empty(), ErrorCode::shape, "empty batch");
  for (const ModelInput* in : batch) require(in != nullptr, ErrorCode::shape, "null model input");
}

// Stacks one fixed-width real vector per sample into [batch, dim].
template <typename Get>
Tensor stack_vectors(std::span<const ModelInput* const> batch, std::size_t dim, const char* what,
                     Get get) {
  Tensor out({batch.size(), dim});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const std::vector<double>& v = get(*batch[b]);
    require(!v.empty(), ErrorCode::shape, std::string("missing ") + what + " input");
    require(v.size() == dim, ErrorCode::shape,
            std::string(what) + " has dimension " + std::to_string(v.size()) + ", model expects " +
                std::to_string(dim));
    for (double x : v) require(std::isfinite(x), ErrorCode::domain, std::string(what) + " is not finite");
    std::copy(v.begin(), v.end(), out.row(b).begin());
  }
  return out;
}

template <typename Get>
IdBatch stack_ids(std::span<const ModelInput* const> batch, std::size_t len, std::size_t vocab,
                  const char* what, Get get, std::vector<std::uint8_t>& mask) {
  IdBatch ids{batch.size(), len, {}};
  ids.ids.reserve(batch.size() * len);
  mask.clear();
  for (const ModelInput* in : batch) {
    const EncodedText& e = get(*in);
    require(e.ids.size() == len && e.mask.size() == len, ErrorCode::shape,
            std::string(what) + " must be encoded to length " + std::to_string(len));
    for (std::size_t t = 0; t < len; ++t) {
      require(e.ids[t] >= 0 && static_cast<std::size_t>(e.ids[t]) < vocab, ErrorCode::shape,
              std::string(what) + " token id outside the model vocabulary");
      ids.ids.push_back(e.ids[t]);
      mask.push_back(e.mask[t]);
    }
  }
  return ids;
}

// Headline real tokens followed by body real tokens, then padding.
IdBatch stack_stream(std::span<const ModelInput* const> batch, const Hyperparameters& hp,
                     std::vector<std::uint8_t>& mask) {
  const std::size_t len = hp.headline_len + hp.body_len;
  IdBatch ids{batch.size(), len, std::vector<std::int32_t>(batch.size() * len, 0)};
  mask.assign(batch.size() * len, 0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    std::size_t t = 0;
    auto append = [&](const EncodedText& e, std::size_t expect, const char* what) {
      require(e.ids.size() == expect && e.mask.size() == expect, ErrorCode::shape,
              std::string(what) + " must be encoded to length " + std::to_string(expect));
      for (std::size_t k = 0; k < expect; ++k) {
        if (!e.mask[k]) continue;
        require(e.ids[k] >= 0 && static_cast<std::size_t>(e.ids[k]) < hp.vocab_size,
                ErrorCode::shape, std::string(what) + " token id outside the model vocabulary");
        ids.ids[b * len + t] = e.ids[k];
        mask[b * len + t] = 1;
        ++t;
      }
    };
    append(batch[b]->headline, hp.headline_len, "headline");
    append(batch[b]->body, hp.body_len, "body");
  }
  return ids;
}

Tensor stack_tfidf(std::span<const ModelInput* const> batch, std::size_t vocab) {
  Tensor out({batch.size(), 2 * vocab});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto row = out.row(b);
    auto put = [&](const SparseVector& v, std::size_t offset, const char* what) {
      require(v.index.size() == v.value.size(), ErrorCode::shape, std::string(what) + " is malformed");
      for (std::size_t k = 0; k < v.index.size(); ++k) {
        require(v.index[k] < vocab, ErrorCode::shape,
                std::string(what) + " index outside the model vocabulary");
        row[offset + v.index[k]] = v.value[k];
      }
    };
    put(batch[b]->headline_tfidf, 0, "headline tfidf");
    put(batch[b]->body_tfidf, vocab, "body tfidf");
  }
  return out;
}

void append_params(std::vector<Param*>& out, std::vector<Param*> more) {
  out.insert(out.end(), more.begin(), more.end());
}

void require_train_trace(const Trace& trace) {
  require(trace.mode == Mode::train, ErrorCode::config, "backward needs a train-mode forward pass");
}

// ---------------------------------------------------------------------------

struct ProposedTrace : Trace {
  IdBatch hid, bid;
  std::vector<std::uint8_t> hmask, bmask;
  SimilarityCache sim_cache;
  Tensor sim_matrix, c1, p1, c2, p2, c3, p3, flat, dropped, sim_pre;
  PoolCache pc1, pc2, pc3;
  DropoutMask drop;
  Tensor hdoc_in, hdoc_pre, bdoc_in, bdoc_pre;
  Tensor z1, n1, z2, n2, a1, a2, logits;
  BatchNormCache bn1, bn2;
};

class ProposedNet final : public Network {
 public:
  ProposedNet(const Hyperparameters& hp, std::uint64_t seed, bool similarity)
      : hp_(hp), similarity_(similarity) {
    if (similarity_) {
      Rng r_emb = component_rng(seed, "embedding");
      embedding_ = Embedding("embedding", hp.vocab_size, hp.embed_dim, r_emb);
      Rng r1 = component_rng(seed, "sim.conv1");
      conv1_ = Conv2d("sim.conv1", 1, hp.conv_filters[0], hp.conv_kernels[0], hp.conv_kernels[0],
                      Padding::same, r1);
      Rng r2 = component_rng(seed, "sim.conv2");
      conv2_ = Conv2d("sim.conv2", hp.conv_filters[0], hp.conv_filters[1], hp.conv_kernels[1],
                      hp.conv_kernels[1], Padding::same, r2);
      Rng r3 = component_rng(seed, "sim.conv3");
      conv3_ = Conv2d("sim.conv3", hp.conv_filters[1], hp.conv_filters[2], hp.conv_kernels[2],
                      hp.conv_kernels[2], Padding::same, r3);
      Rng rf = component_rng(seed, "sim.dense");
      sim_dense_ = Dense("sim.dense", hp.similarity_flat(), hp.similarity_dim, rf);
    }
    Rng rh = component_rng(seed, "doc.headline");
    hdoc_ = Dense("doc.headline", hp.doc_dim, hp.doc_out, rh);
    Rng rb = component_rng(seed, "doc.body");
    bdoc_ = Dense("doc.body", hp.doc_dim, hp.doc_out, rb);
    Rng rd1 = component_rng(seed, "head.dense1");
    dense1_ = Dense("head.dense1",
                    hp.head_input(similarity_ ? Architecture::proposed
                                              : Architecture::proposed_no_similarity),
                    hp.head_hidden1, rd1);
    bn1_ = BatchNorm("head.bn1", hp.head_hidden1);
    Rng rd2 = component_rng(seed, "head.dense2");
    dense2_ = Dense("head.dense2", hp.head_hidden1, hp.head_hidden2, rd2);
    bn2_ = BatchNorm("head.bn2", hp.head_hidden2);
    Rng ro = component_rng(seed, "head.out");
    out_ = Dense("head.out", hp.head_hidden2, kIndicators, ro);
  }

  std::unique_ptr<Trace> forward(std::span<const ModelInput* const> batch, Mode mode,
                                 Rng* rng) const override {
    check_batch(batch);
    auto t = std::make_unique<ProposedTrace>();
    t->mode = mode;
    std::vector<const Tensor*> parts;
    Tensor sim;
    if (similarity_) {
      t->hid = stack_ids(batch, hp_.headline_len, hp_.vocab_size, "headline",
                         [](const ModelInput& m) -> const EncodedText& { return m.headline; }, t->hmask);
      t->bid = stack_ids(batch, hp_.body_len, hp_.vocab_size, "body",
                         [](const ModelInput& m) -> const EncodedText& { return m.body; }, t->bmask);
      Tensor hemb = embedding_.forward(t->hid);
      Tensor bemb = embedding_.forward(t->bid);
      t->sim_matrix = similarity_matrix(hemb, bemb, t->hmask, t->bmask, &t->sim_cache);
      t->c1 = conv1_.forward(t->sim_matrix);
      t->p1 = maxpool2d_forward(t->c1, hp_.pool, hp_.pool, &t->pc1);
      t->c2 = conv2_.forward(t->p1);
      t->p2 = maxpool2d_forward(t->c2, hp_.pool, hp_.pool, &t->pc2);
      t->c3 = conv3_.forward(t->p2);
      t->p3 = maxpool2d_forward(t->c3, hp_.pool, hp_.pool, &t->pc3);
      t->flat = t->p3.reshaped({batch.size(), hp_.similarity_flat()});
      t->dropped = dropout_forward(t->flat, hp_.dropout, mode, rng, t->drop);
      t->sim_pre = sim_dense_.forward(t->dropped);
      sim = relu(t->sim_pre);
      parts.push_back(&sim);
    }
    t->hdoc_in = stack_vectors(batch, hp_.doc_dim, "headline doc vector",
                               [](const ModelInput& m) -> const auto& { return m.headline_doc; });
    t->bdoc_in = stack_vectors(batch, hp_.doc_dim, "body doc vector",
                               [](const ModelInput& m) -> const auto& { return m.body_doc; });
    Tensor htop = stack_vectors(batch, hp_.topics, "headline topic vector",
                                [](const ModelInput& m) -> const auto& { return m.headline_topics; });
    Tensor btop = stack_vectors(batch, hp_.topics, "body topic vector",
                                [](const ModelInput& m) -> const auto& { return m.body_topics; });
    t->hdoc_pre = hdoc_.forward(t->hdoc_in);
    t->bdoc_pre = bdoc_.forward(t->bdoc_in);
    Tensor hdoc = relu(t->hdoc_pre), bdoc = relu(t->bdoc_pre);
    parts.push_back(&hdoc);
    parts.push_back(&bdoc);
    parts.push_back(&htop);
    parts.push_back(&btop);
    t->head_input = concat_columns(parts);

    t->z1 = dense1_.forward(t->head_input);
    t->n1 = mode == Mode::train ? bn1_.forward_train(t->z1, t->bn1) : bn1_.forward_infer(t->z1);
    t->a1 = relu(t->n1);
    t->z2 = dense2_.forward(t->a1);
    t->n2 = mode == Mode::train ? bn2_.forward_train(t->z2, t->bn2) : bn2_.forward_infer(t->z2);
    t->a2 = relu(t->n2);
    t->logits = out_.forward(t->a2);
    t->probs = softmax(t->logits);
    return t;
  }

  void backward(const Trace& base, const Tensor& dprobs) override {
    require_train_trace(base);
    const auto& t = static_cast<const ProposedTrace&>(base);
    Tensor d = softmax_backward(t.probs, dprobs);
    d = out_.backward(t.a2, d);
    d = bn2_.backward(t.bn2, relu_backward(t.n2, d));
    d = dense2_.backward(t.a1, d);
    d = bn1_.backward(t.bn1, relu_backward(t.n1, d));
    Tensor dhead = dense1_.backward(t.head_input, d);

    std::vector<std::size_t> widths;
    if (similarity_) widths.push_back(hp_.similarity_dim);
    widths.insert(widths.end(), {hp_.doc_out, hp_.doc_out, hp_.topics, hp_.topics});
    auto grads = split_columns(dhead, widths);
    std::size_t k = 0;
    if (similarity_) {
      Tensor g = sim_dense_.backward(t.dropped, relu_backward(t.sim_pre, grads[k++]));
      g = dropout_backward(t.drop, g);
      g.reshape(t.p3.shape());
      g = conv3_.backward(t.p2, t.c3, maxpool2d_backward(t.pc3, g));
      g = conv2_.backward(t.p1, t.c2, maxpool2d_backward(t.pc2, g));
      g = conv1_.backward(t.sim_matrix, t.c1, maxpool2d_backward(t.pc1, g));
      auto [dh, da] = similarity_backward(t.sim_cache, g);
      embedding_.backward(t.hid, dh);
      embedding_.backward(t.bid, da);
    }
    hdoc_.backward(t.hdoc_in, relu_backward(t.hdoc_pre, grads[k]));
    bdoc_.backward(t.bdoc_in, relu_backward(t.bdoc_pre, grads[k + 1]));
  }

  void update_running_stats(const Trace& base) override {
    if (base.mode != Mode::train) return;
    const auto& t = static_cast<const ProposedTrace&>(base);
    bn1_.update_running(t.bn1);
    bn2_.update_running(t.bn2);
  }

  std::vector<Param*> params() override {
    std::vector<Param*> p;
    if (similarity_) {
      append_params(p, embedding_.params());
      append_params(p, conv1_.params());
      append_params(p, conv2_.params());
      append_params(p, conv3_.params());
      append_params(p, sim_dense_.params());
    }
    append_params(p, hdoc_.params());
    append_params(p, bdoc_.params());
    append_params(p, dense1_.params());
    append_params(p, bn1_.params());
    append_params(p, dense2_.params());
    append_params(p, bn2_.params());
    append_params(p, out_.params());
    return p;
  }

  std::vector<std::pair<std::string, Tensor*>> buffers() override {
    return {{"head.bn1.running_mean", &bn1_.running_mean},
            {"head.bn1.running_var", &bn1_.running_var},
            {"head.bn2.running_mean", &bn2_.running_mean},
            {"head.bn2.running_var", &bn2_.running_var}};
  }

 private:
  Hyperparameters hp_;
  bool similarity_;
  Embedding embedding_;
  Conv2d conv1_, conv2_, conv3_;
  Dense sim_dense_, hdoc_, bdoc_, dense1_, dense2_, out_;
  BatchNorm bn1_, bn2_;
};

// ---------------------------------------------------------------------------

struct TfidfTrace : Trace {
  Tensor x, z1, z2, logits;
};

class TfidfNet final : public Network {
 public:
  TfidfNet(const Hyperparameters& hp, std::uint64_t seed) : hp_(hp) {
    Rng r1 = component_rng(seed, "ffnn.dense1");
    d1_ = Dense("ffnn.dense1", 2 * hp.vocab_size, hp.head_hidden1, r1);
    Rng r2 = component_rng(seed, "ffnn.dense2");
    d2_ = Dense("ffnn.dense2", hp.head_hidden1, hp.head_hidden2, r2);
    Rng r3 = component_rng(seed, "ffnn.out");
    out_ = Dense("ffnn.out", hp.head_hidden2, kIndicators, r3);
  }

  std::unique_ptr<Trace> forward(std::span<const ModelInput* const> batch, Mode mode,
                                 Rng*) const override {
    check_batch(batch);
    auto t = std::make_unique<TfidfTrace>();
    t->mode = mode;
    t->x = stack_tfidf(batch, hp_.vocab_size);
    t->z1 = d1_.forward(t->x);
    t->z2 = d2_.forward(relu(t->z1));
    t->head_input = relu(t->z2);
    t->logits = out_.forward(t->head_input);
    t->probs = softmax(t->logits);
    return t;
  }

  void backward(const Trace& base, const Tensor& dprobs) override {
    require_train_trace(base);
    const auto& t = static_cast<const TfidfTrace&>(base);
    Tensor d = out_.backward(t.head_input, softmax_backward(t.probs, dprobs));
    d = d2_.backward(relu(t.z1), relu_backward(t.z2, d));
    d1_.backward(t.x, relu_backward(t.z1, d));
  }

  std::vector<Param*> params() override {
    std::vector<Param*> p;
    append_params(p, d1_.params());
    append_params(p, d2_.params());
    append_params(p, out_.params());
    return p;
  }

 private:
  Hyperparameters hp_;
  Dense d1_, d2_, out_;
};

// ---------------------------------------------------------------------------

struct StreamTrace : Trace {
  IdBatch ids;
  std::vector<std::uint8_t> mask;
  Tensor dropped;
  DropoutMask drop;
  Tensor logits;
};

struct CnnTrace : StreamTrace {
  Tensor y1, y2;
  std::vector<std::size_t> argmax;  // per (sample, channel) position
};

class Cnn1dNet final : public Network {
 public:
  Cnn1dNet(const Hyperparameters& hp, std::uint64_t seed) : hp_(hp) {
    Rng re = component_rng(seed, "embedding");
    embedding_ = Embedding("embedding", hp.vocab_size, hp.embed_dim, re);
    Rng r1 = component_rng(seed, "cnn.conv1");
    conv1_ = Conv1d("cnn.conv1", hp.embed_dim, hp.cnn_filters, hp.cnn_width, Padding::same, r1);
    Rng r2 = component_rng(seed, "cnn.conv2");
    conv2_ = Conv1d("cnn.conv2", hp.cnn_filters, hp.cnn_filters, hp.cnn_width, Padding::same, r2);
    Rng ro = component_rng(seed, "cnn.out");
    out_ = Dense("cnn.out", hp.cnn_filters, kIndicators, ro);
  }

  std::unique_ptr<Trace> forward(std::span<const ModelInput* const> batch, Mode mode,
                                 Rng* rng) const override {
    check_batch(batch);
    auto t = std::make_unique<CnnTrace>();
    t->mode = mode;
    t->ids = stack_stream(batch, hp_, t->mask);
    t->dropped = dropout_forward(embedding_.forward(t->ids), hp_.dropout, mode, rng, t->drop);
    t->y1 = conv1_.forward(t->dropped);
    t->y2 = conv2_.forward(t->y1);
    const std::size_t len = t->ids.length, ch = hp_.cnn_filters;
    t->head_input = Tensor({batch.size(), ch});
    t->argmax.assign(batch.size() * ch, 0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      bool any = false;
      for (std::size_t pos = 0; pos < len; ++pos) {
        if (!t->mask[b * len + pos]) continue;
        for (std::size_t c = 0; c < ch; ++c) {
          const double v = t->y2.at(b, pos, c);
          if (!any || v > t->head_input.at(b, c)) {
            t->head_input.at(b, c) = v;
            t->argmax[b * ch + c] = pos;
          }
        }
        any = true;
      }
      require(any, ErrorCode::domain, "cnn: sample " + std::to_string(b) + " has no tokens");
    }
    t->logits = out_.forward(t->head_input);
    t->probs = softmax(t->logits);
    return t;
  }

  void backward(const Trace& base, const Tensor& dprobs) override {
    require_train_trace(base);
    const auto& t = static_cast<const CnnTrace&>(base);
    Tensor dpool = out_.backward(t.head_input, softmax_backward(t.probs, dprobs));
    Tensor dy2 = Tensor::zeros_like(t.y2);
    const std::size_t ch = hp_.cnn_filters;
    for (std::size_t b = 0; b < dpool.dim(0); ++b)
      for (std::size_t c = 0; c < ch; ++c) dy2.at(b, t.argmax[b * ch + c], c) += dpool.at(b, c);
    Tensor d = conv2_.backward(t.y1, t.y2, dy2);
    d = conv1_.backward(t.dropped, t.y1, d);
    embedding_.backward(t.ids, dropout_backward(t.drop, d));
  }

  std::vector<Param*> params() override {
    std::vector<Param*> p;
    append_params(p, embedding_.params());
    append_params(p, conv1_.params());
    append_params(p, conv2_.params());
    append_params(p, out_.params());
    return p;
  }

 private:
  Hyperparameters hp_;
  Embedding embedding_;
  Conv1d conv1_, conv2_;
  Dense out_;
};

// ---------------------------------------------------------------------------

template <typename Cell>
struct RnnTrace : StreamTrace {
  typename Bidirectional<Cell>::Cache rnn;
};

template <typename Cell>
class RnnNet final : public Network {
 public:
  RnnNet(const Hyperparameters& hp, std::uint64_t seed, const std::string& tag) : hp_(hp) {
    Rng re = component_rng(seed, "embedding");
    embedding_ = Embedding("embedding", hp.vocab_size, hp.embed_dim, re);
    Rng rr = component_rng(seed, tag);
    rnn_ = Bidirectional<Cell>(tag, hp.embed_dim, hp.rnn_hidden, rr);
    Rng ro = component_rng(seed, tag + ".out");
    out_ = Dense(tag + ".out", 2 * hp.rnn_hidden, kIndicators, ro);
  }

  std::unique_ptr<Trace> forward(std::span<const ModelInput* const> batch, Mode mode,
                                 Rng* rng) const override {
    check_batch(batch);
    auto t = std::make_unique<RnnTrace<Cell>>();
    t->mode = mode;
    t->ids = stack_stream(batch, hp_, t->mask);
    t->dropped = dropout_forward(embedding_.forward(t->ids), hp_.dropout, mode, rng, t->drop);
    t->head_input = rnn_.forward(t->dropped, t->mask, mode == Mode::train ? &t->rnn : nullptr);
    t->logits = out_.forward(t->head_input);
    t->probs = softmax(t->logits);
    return t;
  }

  void backward(const Trace& base, const Tensor& dprobs) override {
    require_train_trace(base);
    const auto& t = static_cast<const RnnTrace<Cell>&>(base);
    Tensor d = out_.backward(t.head_input, softmax_backward(t.probs, dprobs));
    d = rnn_.backward(t.rnn, d);
    embedding_.backward(t.ids, dropout_backward(t.drop, d));
  }

  std::vector<Param*> params() override {
    std::vector<Param*> p;
    append_params(p, embedding_.params());
    append_params(p, rnn_.params());
    append_params(p, out_.params());
    return p;
  }

 private:
  Hyperparameters hp_;
  Embedding embedding_;
  Bidirectional<Cell> rnn_;
  Dense out_;
};

void validate(Architecture arch, const Hyperparameters& hp) {
  auto positive = [](std::size_t v, const char* what) {
    require(v >= 1, ErrorCode::config, std::string(what) + " must be positive");
  };
  require(hp.vocab_size >= 2, ErrorCode::config, "vocabulary must hold at least the reserved ids");
  positive(hp.headline_len, "headline_len");
  positive(hp.body_len, "body_len");
  require(hp.dropout >= 0.0 && hp.dropout < 1.0, ErrorCode::config, "dropout must lie in [0, 1)");
  switch (arch) {
    case Architecture::proposed:
      positive(hp.embed_dim, "embed_dim");
      positive(hp.pool, "pool");
      positive(hp.similarity_dim, "similarity_dim");
      for (std::size_t i = 0; i < 3; ++i) {
        positive(hp.conv_filters[i], "conv filter count");
        require(hp.conv_kernels[i] % 2 == 1, ErrorCode::config, "conv kernels must be odd");
      }
      [[fallthrough]];
    case Architecture::proposed_no_similarity:
      positive(hp.doc_dim, "doc_dim");
      positive(hp.doc_out, "doc_out");
      positive(hp.topics, "topics");
      positive(hp.head_hidden1, "head_hidden1");
      positive(hp.head_hidden2, "head_hidden2");
      break;
    case Architecture::tfidf_ffnn:
      positive(hp.head_hidden1, "head_hidden1");
      positive(hp.head_hidden2, "head_hidden2");
      break;
    case Architecture::emb_cnn1d_ffnn:
      positive(hp.embed_dim, "embed_dim");
      positive(hp.cnn_filters, "cnn_filters");
      require(hp.cnn_width % 2 == 1, ErrorCode::config, "cnn_width must be odd");
      break;
    case Architecture::emb_bgru_ffnn:
    case Architecture::emb_blstm_ffnn:
      positive(hp.embed_dim, "embed_dim");
      positive(hp.rnn_hidden, "rnn_hidden");
      break;
  }
}

std::unique_ptr<Network> build(Architecture arch, const Hyperparameters& hp, std::uint64_t seed) {
  switch (arch) {
    case Architecture::proposed: return std::make_unique<ProposedNet>(hp, seed, true);
    case Architecture::proposed_no_similarity: return std::make_unique<ProposedNet>(hp, seed, false);
    case Architecture::tfidf_ffnn: return std::make_unique<TfidfNet>(hp, seed);
    case Architecture::emb_cnn1d_ffnn: return std::make_unique<Cnn1dNet>(hp, seed);
    case Architecture::emb_bgru_ffnn: return std::make_unique<RnnNet<GruCell>>(hp, seed, "bgru");
    case Architecture::emb_blstm_ffnn: return std::make_unique<RnnNet<LstmCell>>(hp, seed, "blstm");
  }
  fail(ErrorCode::config, "unknown architecture");
}

}  // namespace

std::string_view to_string(Architecture arch) { return kArchNames[static_cast<int>(arch)]; }

Architecture parse_architecture(std::string_view name) {
  for (Architecture a : kAllArchitectures)
    if (to_string(a) == name) return a;
  fail(ErrorCode::config, "unknown architecture '" + std::string(name) + "'");
}

std::size_t Hyperparameters::similarity_flat() const {
  std::size_t h = headline_len, w = body_len;
  for (int i = 0; i < 3; ++i) {
    h = ceil_div(h, pool);
    w = ceil_div(w, pool);
  }
  return conv_filters[2] * h * w;
}

std::size_t Hyperparameters::head_input(Architecture arch) const {
  switch (arch) {
    case Architecture::proposed: return similarity_dim + 2 * doc_out + 2 * topics;
    case Architecture::proposed_no_similarity: return 2 * doc_out + 2 * topics;
    case Architecture::tfidf_ffnn: return head_hidden2;
    case Architecture::emb_cnn1d_ffnn: return cnn_filters;
    case Architecture::emb_bgru_ffnn:
    case Architecture::emb_blstm_ffnn: return 2 * rnn_hidden;
  }
  return 0;
}

void to_json(json& j, const Hyperparameters& hp) {
  j = json{{"vocab_size", hp.vocab_size},     {"embed_dim", hp.embed_dim},
           {"headline_len", hp.headline_len}, {"body_len", hp.body_len},
           {"conv_filters", hp.conv_filters}, {"conv_kernels", hp.conv_kernels},
           {"pool", hp.pool},                 {"dropout", hp.dropout},
           {"similarity_dim", hp.similarity_dim}, {"doc_dim", hp.doc_dim},
           {"doc_out", hp.doc_out},           {"topics", hp.topics},
           {"head_hidden1", hp.head_hidden1}, {"head_hidden2", hp.head_hidden2},
           {"cnn_filters", hp.cnn_filters},   {"cnn_width", hp.cnn_width},
           {"rnn_hidden", hp.rnn_hidden}};
}

void from_json(const json& j, Hyperparameters& hp) {
  Hyperparameters d;
  hp.vocab_size = j.value("vocab_size", d.vocab_size);
  hp.embed_dim = j.value("embed_dim", d.embed_dim);
  hp.headline_len = j.value("headline_len", d.headline_len);
  hp.body_len = j.value("body_len", d.body_len);
  hp.conv_filters = j.value("conv_filters", d.conv_filters);
  hp.conv_kernels = j.value("conv_kernels", d.conv_kernels);
  hp.pool = j.value("pool", d.pool);
  hp.dropout = j.value("dropout", d.dropout);
  hp.similarity_dim = j.value("similarity_dim", d.similarity_dim);
  hp.doc_dim = j.value("doc_dim", d.doc_dim);
  hp.doc_out = j.value("doc_out", d.doc_out);
  hp.topics = j.value("topics", d.topics);
  hp.head_hidden1 = j.value("head_hidden1", d.head_hidden1);
  hp.head_hidden2 = j.value("head_hidden2", d.head_hidden2);
  hp.cnn_filters = j.value("cnn_filters", d.cnn_filters);
  hp.cnn_width = j.value("cnn_width", d.cnn_width);
  hp.rnn_hidden = j.value("rnn_hidden", d.rnn_hidden);
}

Hyperparameters hyperparameters_for(const FeaturePipeline& features) {
  Hyperparameters hp;
  hp.vocab_size = features.vocab().size();
  hp.headline_len = features.config().headline_len;
  hp.body_len = features.config().body_len;
  hp.doc_dim = features.doc_dim();
  hp.topics = features.config().topics;
  return hp;
}

Tensor similarity_matrix(const Tensor& h, const Tensor& a, std::span<const std::uint8_t> hmask,
                         std::span<const std::uint8_t> amask, SimilarityCache* cache) {
  require(h.rank() == 3 && a.rank() == 3 && h.dim(0) == a.dim(0) && h.dim(2) == a.dim(2),
          ErrorCode::shape,
          "similarity: incompatible " + shape_string(h.shape()) + " and " + shape_string(a.shape()));
  const std::size_t batch = h.dim(0), lh = h.dim(1), la = a.dim(1), d = h.dim(2);
  require(hmask.size() == batch * lh && amask.size() == batch * la, ErrorCode::shape,
          "similarity: mask size mismatch");
  SimilarityCache local;
  SimilarityCache& c = cache ? *cache : local;
  auto unit_rows = [](const Tensor& x, std::span<const std::uint8_t> mask, Tensor& unit,
                      std::vector<double>& norms) {
    unit = Tensor::zeros_like(x);
    const std::size_t rows = x.dim(0) * x.dim(1), dim = x.dim(2);
    norms.assign(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!mask[r]) continue;
      const double* src = x.data() + r * dim;
      double n = 0.0;
      for (std::size_t k = 0; k < dim; ++k) n += src[k] * src[k];
      n = std::sqrt(n);
      if (n == 0.0) continue;
      norms[r] = n;
      double* dst = unit.data() + r * dim;
      for (std::size_t k = 0; k < dim; ++k) dst[k] = src[k] / n;
    }
  };
  unit_rows(h, hmask, c.hn, c.hnorm);
  unit_rows(a, amask, c.an, c.anorm);
  Tensor s({batch, 1, lh, la});
  for (std::size_t b = 0; b < batch; ++b) {
    Eigen::Map<const MatR> hn(c.hn.data() + b * lh * d, lh, d);
    Eigen::Map<const MatR> an(c.an.data() + b * la * d, la, d);
    Eigen::Map<MatR> out(s.data() + b * lh * la, lh, la);
    out.noalias() = hn * an.transpose();
  }
  return s;
}

std::pair<Tensor, Tensor> similarity_backward(const SimilarityCache& c, const Tensor& ds) {
  const std::size_t batch = c.hn.dim(0), lh = c.hn.dim(1), la = c.an.dim(1), d = c.hn.dim(2);
  expect_shape(ds, {batch, 1, lh, la}, "similarity gradient");
  Tensor dh = Tensor::zeros_like(c.hn), da = Tensor::zeros_like(c.an);
  for (std::size_t b = 0; b < batch; ++b) {
    Eigen::Map<const MatR> hn(c.hn.data() + b * lh * d, lh, d);
    Eigen::Map<const MatR> an(c.an.data() + b * la * d, la, d);
    Eigen::Map<const MatR> g(ds.data() + b * lh * la, lh, la);
    Eigen::Map<MatR> gh(dh.data() + b * lh * d, lh, d);
    Eigen::Map<MatR> ga(da.data() + b * la * d, la, d);
    gh.noalias() = g * an;
    ga.noalias() = g.transpose() * hn;
  }
  // Through the normalization u = x / |x|: dx = (du - (du . u) u) / |x|.
  auto through_norm = [d](Tensor& grad, const Tensor& unit, const std::vector<double>& norms) {
    for (std::size_t r = 0; r < norms.size(); ++r) {
      double* g = grad.data() + r * d;
      if (norms[r] == 0.0) {
        std::fill(g, g + d, 0.0);
        continue;
      }
      const double* u = unit.data() + r * d;
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += g[k] * u[k];
      for (std::size_t k = 0; k < d; ++k) g[k] = (g[k] - dot * u[k]) / norms[r];
    }
  };
  through_norm(dh, c.hn, c.hnorm);
  through_norm(da, c.an, c.anorm);
  return {std::move(dh), std::move(da)};
}

Model::Model(Architecture arch, Hyperparameters hp, std::uint64_t seed)
    : arch_(arch), hp_(std::move(hp)), seed_(seed) {
  validate(arch_, hp_);
  net_ = build(arch_, hp_, seed_);
}

Tensor Model::predict(std::span<const ModelInput* const> batch) const {
  return net_->forward(batch, Mode::infer, nullptr)->probs;
}

void Model::zero_grad() {
  for (Param* p : net_->params()) p->zero_grad();
}

std::vector<std::pair<std::string, Tensor*>> Model::state() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (Param* p : net_->params()) out.emplace_back(p->name, &p->value);
  for (auto& b : net_->buffers()) out.push_back(b);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> Model::state() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<Model*>(this)->state()) out.emplace_back(name, t);
  return out;
}

std::size_t Model::parameter_count() {
  std::size_t n = 0;
  for (Param* p : net_->params()) n += p->value.size();
  return n;
}

void Model::round_to_f32() {
  for (auto& [name, t] : state()) hf::round_to_f32(*t);
}

}  // namespace hf
