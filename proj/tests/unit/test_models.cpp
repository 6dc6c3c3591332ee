#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <utility>

#include "headline_forge/error.hpp"
#include "headline_forge/models.hpp"
#include "support.hpp"

using namespace hf;
using namespace hf::testing;

namespace {

Hyperparameters tiny() {
  Hyperparameters hp;
  hp.vocab_size = 17;
  hp.embed_dim = 5;
  hp.headline_len = 5;
  hp.body_len = 9;
  hp.conv_filters = {2, 3, 2};
  hp.conv_kernels = {3, 3, 1};
  hp.similarity_dim = 6;
  hp.doc_dim = 4;
  hp.doc_out = 3;
  hp.topics = 3;
  hp.head_hidden1 = 7;
  hp.head_hidden2 = 5;
  hp.cnn_filters = 4;
  hp.rnn_hidden = 3;
  return hp;
}

EncodedText encoded(std::size_t len, std::size_t real, std::size_t vocab, Rng& rng) {
  EncodedText e;
  for (std::size_t t = 0; t < len; ++t) {
    const bool on = t < real;
    e.ids.push_back(on ? static_cast<std::int32_t>(2 + rng.below(vocab - 2)) : 0);
    e.mask.push_back(on ? 1 : 0);
  }
  return e;
}

std::vector<double> vec(std::size_t n, Rng& rng, double lo) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, 1.0);
  return v;
}

SparseVector sparse(std::size_t vocab, Rng& rng) {
  SparseVector s;
  for (std::uint32_t j = 2; j < vocab; ++j)
    if (rng.uniform() < 0.3) {
      s.index.push_back(j);
      s.value.push_back(rng.uniform(0.1, 1.0));
    }
  return s;
}

ModelInput random_input(const Hyperparameters& hp, Rng& rng) {
  ModelInput in;
  in.headline = encoded(hp.headline_len, 1 + rng.below(hp.headline_len), hp.vocab_size, rng);
  in.body = encoded(hp.body_len, 1 + rng.below(hp.body_len), hp.vocab_size, rng);
  in.headline_doc = vec(hp.doc_dim, rng, -1);
  in.body_doc = vec(hp.doc_dim, rng, -1);
  in.headline_topics = vec(hp.topics, rng, 0);
  in.body_topics = vec(hp.topics, rng, 0);
  in.headline_tfidf = sparse(hp.vocab_size, rng);
  in.body_tfidf = sparse(hp.vocab_size, rng);
  return in;
}

std::vector<const ModelInput*> pointers(const std::vector<ModelInput>& v) {
  std::vector<const ModelInput*> out;
  for (const auto& x : v) out.push_back(&x);
  return out;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("architecture names") {
    for (Architecture a : kAllArchitectures) CHECK(parse_architecture(to_string(a)) == a);
    CHECK(to_string(Architecture::proposed) == "proposed");
    CHECK_THROWS_AS(parse_architecture("transformer"), Error);
  }

  TEST_CASE("default widths") {
    Hyperparameters hp;
    // 20x200 halved three times with ceiling: 3x25, times 32 channels
    CHECK(hp.similarity_flat() == 3 * 25 * 32);
    CHECK(hp.head_input(Architecture::proposed) == 400);
    CHECK(hp.head_input(Architecture::proposed_no_similarity) == 300);
    CHECK(hp.head_input(Architecture::emb_bgru_ffnn) == 128);
    nlohmann::json j = hp;
    Hyperparameters back = j.get<Hyperparameters>();
    CHECK(nlohmann::json(back) == j);
  }

  TEST_CASE("hyperparameter validation") {
    Hyperparameters hp = tiny();
    hp.conv_kernels = {4, 3, 3};
    CHECK_THROWS_AS(Model(Architecture::proposed, hp, 1), Error);
    hp = tiny();
    hp.dropout = 1.0;
    CHECK_THROWS_AS(Model(Architecture::emb_bgru_ffnn, hp, 1), Error);
    hp = tiny();
    hp.vocab_size = 1;
    CHECK_THROWS_AS(Model(Architecture::tfidf_ffnn, hp, 1), Error);
  }

  TEST_CASE("similarity matrix by hand") {
    Tensor h({1, 2, 2}, {1, 0, 0, 0});
    Tensor a({1, 3, 2}, {1, 0, 0, 2, 3, 3});
    std::vector<std::uint8_t> hm = {1, 1}, am = {1, 1, 0};
    Tensor s = similarity_matrix(h, a, hm, am, nullptr);
    REQUIRE(s.shape() == Shape{1, 1, 2, 3});
    CHECK(near(s.at(0, 0, 0, 0), 1.0, 1e-12));
    CHECK(near(s.at(0, 0, 0, 1), 0.0, 1e-12));
    CHECK(s.at(0, 0, 0, 2) == 0.0);  // masked body token
    for (std::size_t j = 0; j < 3; ++j) CHECK(s.at(0, 0, 1, j) == 0.0);  // zero vector
    am = {1, 1, 1};
    CHECK(near(similarity_matrix(h, a, hm, am, nullptr).at(0, 0, 0, 2), std::sqrt(0.5), 1e-12));
  }

  TEST_CASE("similarity gradient") {
    Rng rng(21);
    Tensor h = random_tensor({2, 3, 4}, rng), a = random_tensor({2, 5, 4}, rng);
    std::vector<std::uint8_t> hm = {1, 1, 0, 1, 0, 0}, am = {1, 1, 1, 0, 1, 1, 1, 1, 1, 1};
    Tensor w = random_tensor({2, 1, 3, 5}, rng);
    auto loss = [&] { return probe(similarity_matrix(h, a, hm, am, nullptr), w); };
    auto analytic = [&] {
      SimilarityCache cache;
      similarity_matrix(h, a, hm, am, &cache);
      auto [dh, da] = similarity_backward(cache, w);
      return std::vector<GradTarget>{{"h", &h, dh}, {"a", &a, da}};
    };
    GradCheckReport r = gradient_check(loss, analytic);
    CHECK_MESSAGE(r.passed, r.worst);
  }

  TEST_CASE("outputs are distributions and gradients check for every architecture") {
    const Hyperparameters hp = tiny();
    Rng data(22);
    std::vector<ModelInput> inputs;
    for (int i = 0; i < 4; ++i) inputs.push_back(random_input(hp, data));
    auto batch = pointers(inputs);
    for (Architecture arch : kAllArchitectures) {
      CAPTURE(to_string(arch));
      Model model(arch, hp, 5);
      Tensor p = model.predict(batch);
      REQUIRE(p.shape() == Shape{4, 4});
      for (std::size_t b = 0; b < 4; ++b) {
        double s = 0;
        for (std::size_t k = 0; k < 4; ++k) {
          CHECK(p.at(b, k) > 0.0);
          s += p.at(b, k);
        }
        CHECK(near(s, 1.0, 1e-12));
      }

      Rng wr(23);
      Tensor w = random_tensor({4, 4}, wr);
      auto loss = [&] {
        Rng r(24);
        return probe(model.forward(batch, Mode::train, &r)->probs, w);
      };
      auto analytic = [&] {
        model.zero_grad();
        Rng r(24);
        auto trace = model.forward(batch, Mode::train, &r);
        model.backward(*trace, w);
        return targets_of(model.params());
      };
      GradCheckOptions opt;
      opt.skip_kinks = true;
      opt.max_coords_per_tensor = 40;
      GradCheckReport r = gradient_check(loss, analytic, opt);
      CHECK_MESSAGE(r.passed, r.worst);
      CHECK(r.checked > 100);
    }
  }

  TEST_CASE("seeded construction") {
    const Hyperparameters hp = tiny();
    for (Architecture arch : kAllArchitectures) {
      Model a(arch, hp, 3), b(arch, hp, 3), c(arch, hp, 4);
      auto sa = a.state(), sb = b.state(), sc = c.state();
      REQUIRE(sa.size() == sb.size());
      bool differs = false;
      std::set<std::string> names;
      for (std::size_t i = 0; i < sa.size(); ++i) {
        CHECK(*sa[i].second == *sb[i].second);
        differs = differs || !(*sa[i].second == *sc[i].second);
        names.insert(sa[i].first);
      }
      CHECK(differs);
      CHECK(names.size() == sa.size());
    }
  }

  TEST_CASE("batch norm buffers appear only in the proposed head") {
    const Hyperparameters hp = tiny();
    auto has_running = [](Model& m) {
      for (auto& [name, t] : m.state())
        if (name.find("running_mean") != std::string::npos) return true;
      return false;
    };
    Model p(Architecture::proposed, hp, 1), t(Architecture::tfidf_ffnn, hp, 1);
    CHECK(has_running(p));
    CHECK_FALSE(has_running(t));
    std::size_t n = 0;
    for (Param* q : p.params()) n += q->value.size();
    CHECK(p.parameter_count() == n);
  }

  TEST_CASE("no-similarity variant ignores token ids") {
    const Hyperparameters hp = tiny();
    Rng rng(25);
    std::vector<ModelInput> inputs = {random_input(hp, rng), random_input(hp, rng)};
    Model m(Architecture::proposed_no_similarity, hp, 2);
    Tensor before = m.predict(pointers(inputs));
    inputs[0].headline = encoded(hp.headline_len, 2, hp.vocab_size, rng);
    inputs[1].body = encoded(hp.body_len, 7, hp.vocab_size, rng);
    CHECK(m.predict(pointers(inputs)) == before);
    Model full(Architecture::proposed, hp, 2);
    (void)full.predict(pointers(inputs));
  }

  TEST_CASE("stream models see tokens, not padding layout") {
    const Hyperparameters hp = tiny();
    ModelInput a;
    a.headline = {{3, 4, 0, 0, 0}, {1, 1, 0, 0, 0}};
    a.body = {{5, 6, 7, 0, 0, 0, 0, 0, 0}, {1, 1, 1, 0, 0, 0, 0, 0, 0}};
    ModelInput b = a;
    b.headline = {{3, 0, 4, 0, 0}, {1, 0, 1, 0, 0}};
    for (Architecture arch : {Architecture::emb_cnn1d_ffnn, Architecture::emb_bgru_ffnn,
                              Architecture::emb_blstm_ffnn}) {
      Model m(arch, hp, 9);
      std::vector<const ModelInput*> pa = {&a}, pb = {&b};
      CHECK(m.predict(pa) == m.predict(pb));
    }
  }

  TEST_CASE("input errors") {
    const Hyperparameters hp = tiny();
    Rng rng(26);
    std::vector<ModelInput> inputs = {random_input(hp, rng), random_input(hp, rng)};
    Model m(Architecture::proposed, hp, 1);

    auto code_of = [&](const std::vector<ModelInput>& in) {
      try {
        (void)m.predict(pointers(in));
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::io;
    };
    auto bad = inputs;
    bad[1].body_doc.pop_back();
    CHECK(code_of(bad) == ErrorCode::shape);
    bad = inputs;
    bad[0].headline_topics.clear();
    CHECK(code_of(bad) == ErrorCode::shape);
    bad = inputs;
    bad[0].headline_doc[0] = std::nan("");
    CHECK(code_of(bad) == ErrorCode::domain);
    bad = inputs;
    bad[0].headline.ids[0] = 17;
    CHECK(code_of(bad) == ErrorCode::shape);

    auto trace = m.forward(pointers(inputs), Mode::infer, nullptr);
    CHECK_THROWS_AS(m.backward(*trace, Tensor({2, 4})), Error);
    std::vector<const ModelInput*> one = {&inputs[0]};
    Rng r(1);
    CHECK_THROWS_AS(m.forward(one, Mode::train, &r), Error);
    CHECK(m.predict(one).shape() == Shape{1, 4});
  }

  TEST_CASE("f32 rounding is idempotent") {
    Model m(Architecture::proposed, tiny(), 1);
    m.round_to_f32();
    std::vector<Tensor> once;
    for (auto& [name, t] : m.state()) once.push_back(*t);
    m.round_to_f32();
    std::size_t i = 0;
    for (auto& [name, t] : m.state()) {
      CHECK(*t == once[i++]);
      for (double v : t->values()) CHECK(static_cast<double>(static_cast<float>(v)) == v);
    }
  }
  TEST_CASE("similarity follows body permutation") {
    Rng rng(27);
    Tensor h = random_tensor({1, 3, 4}, rng), a = random_tensor({1, 6, 4}, rng);
    std::vector<std::uint8_t> hm = {1, 1, 1}, am = {1, 1, 0, 1, 1, 1};
    const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
    Tensor pa({1, 6, 4});
    std::vector<std::uint8_t> pm(6);
    for (std::size_t j = 0; j < 6; ++j) {
      for (std::size_t k = 0; k < 4; ++k) pa.at(0, j, k) = a.at(0, perm[j], k);
      pm[j] = am[perm[j]];
    }
    Tensor s = similarity_matrix(h, a, hm, am, nullptr), ps = similarity_matrix(h, pa, hm, pm, nullptr);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        CHECK(ps.at(0, 0, i, j) == s.at(0, 0, i, perm[j]));
        CHECK(std::abs(s.at(0, 0, i, j)) <= 1.0);
      }
  }

  TEST_CASE("dropping the similarity branch leaves the other branches untouched") {
    const Hyperparameters hp = tiny();
    Model full(Architecture::proposed, hp, 6), ablated(Architecture::proposed_no_similarity, hp, 6);
    std::map<std::string, const Tensor*> in_full;
    for (auto& [name, t] : std::as_const(full).state()) in_full[name] = t;
    std::size_t shared = 0;
    for (auto& [name, t] : std::as_const(ablated).state()) {
      CAPTURE(name);
      REQUIRE(in_full.count(name) == 1);
      if (name.rfind("head.dense1", 0) == 0) continue;
      CHECK(*in_full[name] == *t);
      ++shared;
    }
    CHECK(shared > 4);
  }
}
