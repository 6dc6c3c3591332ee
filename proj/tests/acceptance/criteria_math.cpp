#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>

#include "criteria.hpp"
#include "headline_forge/conv.hpp"
#include "headline_forge/gradcheck.hpp"
#include "headline_forge/labeler.hpp"
#include "headline_forge/layers.hpp"
#include "headline_forge/losses.hpp"
#include "headline_forge/metrics.hpp"
#include "headline_forge/models.hpp"
#include "headline_forge/recurrent.hpp"
#include "headline_forge/rng.hpp"
#include "headline_forge/topics.hpp"

namespace hf::acceptance {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

// ---------------------------------------------------------------------------

Outcome indicator_grid() {
  const auto start = Clock::now();
  std::size_t bad_sum = 0, bad_argmax = 0, unique = 0, bad_symmetry = 0;
  auto dist = [](std::size_t i, std::size_t j) { return indicator_distribution(i / 100.0, j / 100.0); };
  for (std::size_t i = 0; i <= 100; ++i) {
    for (std::size_t j = 0; j <= 100; ++j) {
      const double c = i / 100.0, d = j / 100.0;
      const QualityDistribution q = dist(i, j);
      double s = 0;
      for (double p : q.p) s += p;
      if (std::abs(s - 1.0) > 1e-9) ++bad_sum;

      // brute-force nearest corner
      double best = 1e300, second = 1e300;
      int nearest = -1;
      for (int k = 0; k < 4; ++k) {
        const double r = std::hypot(c - kIndicatorCorners[k][0], d - kIndicatorCorners[k][1]);
        if (r < best) {
          second = best;
          best = r;
          nearest = k;
        } else if (r < second) {
          second = r;
        }
      }
      if (second - best > 1e-12) {
        ++unique;
        if (hard_label(q) != nearest + 1) ++bad_argmax;
      }

      // c -> 1-c swaps corners 1<->2 and 3<->4; d -> 1-d swaps 1<->4 and 2<->3
      const QualityDistribution mc = dist(100 - i, j), md = dist(i, 100 - j);
      const int swap_c[4] = {1, 0, 3, 2}, swap_d[4] = {3, 2, 1, 0};
      for (int k = 0; k < 4; ++k) {
        if (std::abs(mc.p[k] - q.p[swap_c[k]]) > 1e-12) ++bad_symmetry;
        if (std::abs(md.p[k] - q.p[swap_d[k]]) > 1e-12) ++bad_symmetry;
      }
    }
  }
  // nearest-corner ties lie exactly on the midlines c = 0.5 and d = 0.5: 201 grid points
  const QualityDistribution centre = indicator_distribution(0.5, 0.5);
  const bool uniform = std::all_of(centre.p.begin(), centre.p.end(), [](double p) { return p == 0.25; });
  const double secs = seconds_since(start);
  std::ostringstream msg;
  msg << "10201 points; sum violations " << bad_sum << "; argmax mismatches " << bad_argmax << " of " << unique
      << " unique-corner points; symmetry violations " << bad_symmetry << "; centre uniform "
      << (uniform ? "yes" : "no") << "; " << secs << " s";
  return {bad_sum == 0 && bad_argmax == 0 && unique == 10201 - 201 && bad_symmetry == 0 && uniform && secs < 1.0,
          msg.str()};
}

// ---------------------------------------------------------------------------

Tensor random_distributions(std::size_t n, Rng& rng) {
  Tensor t({n, 4});
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t k = 0; k < 4; ++k) s += t.at(i, k) = std::exp(3.0 * rng.uniform());
    for (std::size_t k = 0; k < 4; ++k) t.at(i, k) /= s;
  }
  return t;
}

Outcome rae_identities() {
  const auto start = Clock::now();
  Rng rng(derive_seed(7, "acceptance.rae"));
  double worst_mean = 0, worst_perfect = 0, worst_mae = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(59);
    const Tensor truth = random_distributions(n, rng), other = random_distributions(n, rng);
    worst_mean = std::max(worst_mean, std::abs(rae(mean_predictor(truth), truth) - 100.0));
    worst_perfect = std::max(worst_perfect, std::abs(rae(truth, truth)));
    worst_mae = std::max(worst_mae, mae(other, truth));
  }
  const Tensor truth({2, 4}, {1, 0, 0, 0, 0, 1, 0, 0});
  const Tensor pred({2, 4}, {0.5, 0.5, 0, 0, 0.5, 0.5, 0, 0});
  const double hand_mae = mae(pred, truth), hand_rae = rae(pred, truth);
  const double secs = seconds_since(start);
  std::ostringstream msg;
  msg << "1000 random datasets: max |RAE(mean)-100| " << worst_mean << ", max RAE(perfect) " << worst_perfect
      << ", max MAE " << worst_mae << "; hand example MAE " << hand_mae << " RAE " << hand_rae << "; " << secs
      << " s";
  return {worst_mean <= 1e-6 && worst_perfect == 0.0 && worst_mae <= 0.5 && hand_mae == 0.25 &&
              hand_rae == 100.0 && secs < 1.0,
          msg.str()};
}

// ---------------------------------------------------------------------------

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

double probe(const Tensor& y, const Tensor& w) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

void add_params(std::vector<GradTarget>& out, const std::vector<Param*>& params) {
  for (Param* p : params) out.push_back({p->name, &p->value, p->grad});
}

void zero(const std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

// One differentiable unit under test. `analytic` must recompute from the
// current values, since the checker perturbs them in place.
struct GradCase {
  std::string name;
  std::function<double()> loss;
  std::function<std::vector<GradTarget>()> analytic;
  bool kinked = false;
  std::size_t max_coords = 0;
  std::shared_ptr<void> state;
};

template <typename S>
GradCase make_case(std::string name, std::shared_ptr<S> s, bool kinked = false) {
  GradCase c;
  c.name = std::move(name);
  c.loss = [s] { return s->loss(); };
  c.analytic = [s] { return s->analytic(); };
  c.kinked = kinked;
  c.state = s;
  return c;
}

struct DenseCase {
  Rng rng{1};
  Dense layer{"dense", 5, 3, rng};
  Tensor x = random_tensor({2, 5}, rng), w = random_tensor({2, 3}, rng);
  double loss() { return probe(layer.forward(x), w); }
  std::vector<GradTarget> analytic() {
    zero(layer.params());
    Tensor dx = layer.backward(x, w);
    std::vector<GradTarget> t = {{"x", &x, dx}};
    add_params(t, layer.params());
    return t;
  }
};

template <Tensor (*F)(const Tensor&), Tensor (*B)(const Tensor&, const Tensor&), bool UsesOutput>
struct ActivationCase {
  Rng rng{2};
  Tensor x = random_tensor({2, 6}, rng, -3, 3), w = random_tensor({2, 6}, rng);
  double loss() { return probe(F(x), w); }
  std::vector<GradTarget> analytic() {
    const Tensor y = F(x);
    return {{"x", &x, B(UsesOutput ? y : x, w)}};
  }
};

struct EmbeddingCase {
  Rng rng{3};
  Embedding emb{"embedding", 7, 4, rng};
  IdBatch ids{2, 5, {3, 0, 3, 6, 2, 1, 5, 0, 0, 4}};
  Tensor w = random_tensor({2, 5, 4}, rng);
  double loss() { return probe(emb.forward(ids), w); }
  std::vector<GradTarget> analytic() {
    zero(emb.params());
    emb.backward(ids, w);
    std::vector<GradTarget> t;
    add_params(t, emb.params());
    return t;
  }
};

struct BatchNormCase {
  Rng rng{4};
  BatchNorm bn{"bn", 4};
  Tensor x = random_tensor({2, 4}, rng, -2, 2), w = random_tensor({2, 4}, rng);
  BatchNormCase() {
    bn.gamma.value = random_tensor({4}, rng, 0.5, 1.5);
    bn.beta.value = random_tensor({4}, rng);
  }
  double loss() {
    BatchNormCache c;
    return probe(bn.forward_train(x, c), w);
  }
  std::vector<GradTarget> analytic() {
    zero(bn.params());
    BatchNormCache c;
    bn.forward_train(x, c);
    Tensor dx = bn.backward(c, w);
    std::vector<GradTarget> t = {{"x", &x, dx}};
    add_params(t, bn.params());
    return t;
  }
};

struct DropoutCase {
  Rng rng{5};
  Tensor x = random_tensor({2, 8}, rng), w = random_tensor({2, 8}, rng);
  double loss() {
    Rng r(55);
    DropoutMask m;
    return probe(dropout_forward(x, 0.3, Mode::train, &r, m), w);
  }
  std::vector<GradTarget> analytic() {
    Rng r(55);
    DropoutMask m;
    dropout_forward(x, 0.3, Mode::train, &r, m);
    return {{"x", &x, dropout_backward(m, w)}};
  }
};

struct MaxPoolCase {
  Rng rng{6};
  Tensor x = random_tensor({2, 2, 5, 7}, rng), w = random_tensor({2, 2, 3, 4}, rng);
  double loss() { return probe(maxpool2d_forward(x, 2, 2, nullptr), w); }
  std::vector<GradTarget> analytic() {
    PoolCache c;
    maxpool2d_forward(x, 2, 2, &c);
    return {{"x", &x, maxpool2d_backward(c, w)}};
  }
};

struct Conv2dCase {
  Rng rng{7};
  Conv2d conv{"conv2d", 2, 3, 5, 5, Padding::same, rng};
  Tensor x = random_tensor({2, 2, 6, 7}, rng), w = random_tensor({2, 3, 6, 7}, rng);
  double loss() { return probe(conv.forward(x), w); }
  std::vector<GradTarget> analytic() {
    zero(conv.params());
    Tensor y = conv.forward(x);
    Tensor dx = conv.backward(x, y, w);
    std::vector<GradTarget> t = {{"x", &x, dx}};
    add_params(t, conv.params());
    return t;
  }
};

struct Conv1dCase {
  Rng rng{8};
  Conv1d conv{"conv1d", 4, 3, 3, Padding::same, rng};
  Tensor x = random_tensor({2, 9, 4}, rng), w = random_tensor({2, 9, 3}, rng);
  double loss() { return probe(conv.forward(x), w); }
  std::vector<GradTarget> analytic() {
    zero(conv.params());
    Tensor y = conv.forward(x);
    Tensor dx = conv.backward(x, y, w);
    std::vector<GradTarget> t = {{"x", &x, dx}};
    add_params(t, conv.params());
    return t;
  }
};

template <typename Cell>
struct CellCase {
  Rng rng{9};
  Cell cell{"cell", 4, 3, rng};
  Tensor x = random_tensor({2, 4}, rng), s = random_tensor({2, cell.state_size()}, rng);
  Tensor w = random_tensor({2, cell.state_size()}, rng);
  double loss() { return probe(cell.step(x, s, nullptr), w); }
  std::vector<GradTarget> analytic() {
    zero(cell.params());
    typename Cell::Cache c;
    cell.step(x, s, &c);
    auto [dx, ds] = cell.step_backward(c, w);
    std::vector<GradTarget> t = {{"x", &x, dx}, {"state", &s, ds}};
    add_params(t, cell.params());
    return t;
  }
};

template <typename Cell>
struct BidirectionalCase {
  Rng rng{10};
  Bidirectional<Cell> rnn{"birnn", 3, 4, rng};
  Tensor x = random_tensor({2, 6, 3}, rng), w = random_tensor({2, 8}, rng);
  std::vector<std::uint8_t> mask = {1, 1, 0, 1, 0, 0, 1, 1, 1, 1, 1, 1};
  double loss() { return probe(rnn.forward(x, mask, nullptr), w); }
  std::vector<GradTarget> analytic() {
    zero(rnn.params());
    typename Bidirectional<Cell>::Cache c;
    rnn.forward(x, mask, &c);
    Tensor dx = rnn.backward(c, w);
    std::vector<GradTarget> t = {{"x", &x, dx}};
    add_params(t, rnn.params());
    return t;
  }
};

struct SimilarityCase {
  Rng rng{11};
  Tensor h = random_tensor({2, 4, 5}, rng), a = random_tensor({2, 7, 5}, rng);
  std::vector<std::uint8_t> hm = {1, 1, 1, 0, 1, 1, 0, 0}, am = {1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1, 1, 1, 1};
  Tensor w = random_tensor({2, 1, 4, 7}, rng);
  double loss() { return probe(similarity_matrix(h, a, hm, am, nullptr), w); }
  std::vector<GradTarget> analytic() {
    SimilarityCache c;
    similarity_matrix(h, a, hm, am, &c);
    auto [dh, da] = similarity_backward(c, w);
    return {{"h", &h, dh}, {"a", &a, da}};
  }
};

struct MseCase {
  Rng rng{12};
  Tensor p = random_tensor({2, 4}, rng, 0, 1), t = random_tensor({2, 4}, rng, 0, 1);
  double loss() { return mse(p, t).value; }
  std::vector<GradTarget> analytic() { return {{"pred", &p, mse(p, t).grad}}; }
};

struct CrossEntropyCase {
  Rng rng{13};
  Tensor p = random_tensor({2, 4}, rng, 0.1, 1);
  std::vector<int> labels = {2, 0};
  double loss() { return cross_entropy(p, labels).value; }
  std::vector<GradTarget> analytic() { return {{"probs", &p, cross_entropy(p, labels).grad}}; }
};

// ---------------------------------------------------------------------------

ModelInput random_input(const Hyperparameters& hp, Rng& rng) {
  auto encoded = [&](std::size_t len) {
    EncodedText e;
    const std::size_t real = 1 + rng.below(len);
    for (std::size_t t = 0; t < len; ++t) {
      e.ids.push_back(t < real ? static_cast<std::int32_t>(1 + rng.below(hp.vocab_size - 1)) : 0);
      e.mask.push_back(t < real ? 1 : 0);
    }
    return e;
  };
  auto vec = [&](std::size_t n, double lo) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, 1.0);
    return v;
  };
  auto sparse = [&] {
    SparseVector s;
    for (std::uint32_t j = 2; j < hp.vocab_size; ++j)
      if (rng.uniform() < 0.2) {
        s.index.push_back(j);
        s.value.push_back(rng.uniform(0.05, 1.0));
      }
    return s;
  };
  ModelInput in;
  in.headline = encoded(hp.headline_len);
  in.body = encoded(hp.body_len);
  in.headline_doc = vec(hp.doc_dim, -1);
  in.body_doc = vec(hp.doc_dim, -1);
  in.headline_topics = vec(hp.topics, 0);
  in.body_topics = vec(hp.topics, 0);
  in.headline_tfidf = sparse();
  in.body_tfidf = sparse();
  return in;
}

struct ArchitectureCase {
  std::unique_ptr<Model> model;
  std::vector<ModelInput> inputs;
  std::vector<const ModelInput*> batch;
  Tensor w;
  ArchitectureCase(Architecture arch, const Hyperparameters& hp) {
    model = std::make_unique<Model>(arch, hp, 17);
    Rng rng(derive_seed(17, to_string(arch)));
    inputs = {random_input(hp, rng), random_input(hp, rng)};
    for (const auto& in : inputs) batch.push_back(&in);
    w = random_tensor({2, 4}, rng);
  }
  double loss() {
    Rng r(99);
    return probe(model->forward(batch, Mode::train, &r)->probs, w);
  }
  std::vector<GradTarget> analytic() {
    model->zero_grad();
    Rng r(99);
    auto trace = model->forward(batch, Mode::train, &r);
    model->backward(*trace, w);
    std::vector<GradTarget> t;
    add_params(t, model->params());
    return t;
  }
};

Outcome gradient_suite() {
  const auto start = Clock::now();
  std::vector<GradCase> cases;
  cases.push_back(make_case("dense", std::make_shared<DenseCase>()));
  cases.push_back(make_case("relu", std::make_shared<ActivationCase<relu, relu_backward, false>>(), true));
  cases.push_back(make_case("sigmoid", std::make_shared<ActivationCase<sigmoid, sigmoid_backward, true>>()));
  cases.push_back(make_case("tanh", std::make_shared<ActivationCase<hf::tanh, tanh_backward, true>>()));
  cases.push_back(make_case("softmax", std::make_shared<ActivationCase<softmax, softmax_backward, true>>()));
  cases.push_back(make_case("embedding", std::make_shared<EmbeddingCase>()));
  cases.push_back(make_case("batchnorm", std::make_shared<BatchNormCase>()));
  cases.push_back(make_case("dropout", std::make_shared<DropoutCase>()));
  cases.push_back(make_case("maxpool2d", std::make_shared<MaxPoolCase>(), true));
  cases.push_back(make_case("conv2d", std::make_shared<Conv2dCase>(), true));
  cases.push_back(make_case("conv1d", std::make_shared<Conv1dCase>(), true));
  cases.push_back(make_case("gru_cell", std::make_shared<CellCase<GruCell>>()));
  cases.push_back(make_case("lstm_cell", std::make_shared<CellCase<LstmCell>>()));
  cases.push_back(make_case("bigru", std::make_shared<BidirectionalCase<GruCell>>()));
  cases.push_back(make_case("bilstm", std::make_shared<BidirectionalCase<LstmCell>>()));
  cases.push_back(make_case("similarity", std::make_shared<SimilarityCase>()));
  cases.push_back(make_case("mse", std::make_shared<MseCase>()));
  cases.push_back(make_case("cross_entropy", std::make_shared<CrossEntropyCase>()));

  // Full architectures at the standard widths, with a small vocabulary.
  Hyperparameters hp;
  hp.vocab_size = 40;
  for (Architecture arch : kAllArchitectures) {
    GradCase c = make_case(std::string(to_string(arch)), std::make_shared<ArchitectureCase>(arch, hp), true);
    c.max_coords = 12;
    cases.push_back(std::move(c));
  }

  std::size_t passed = 0, mutants_caught = 0, checked = 0, skipped = 0;
  std::vector<std::string> problems;
  for (GradCase& c : cases) {
    GradCheckOptions opt;
    opt.tolerance = 1e-4;
    opt.skip_kinks = c.kinked;
    opt.max_coords_per_tensor = c.max_coords;
    opt.seed = derive_seed(3, c.name);
    const GradCheckReport r = gradient_check(c.loss, c.analytic, opt);
    checked += r.checked;
    skipped += r.skipped;
    if (r.passed && r.checked > 0) ++passed;
    else problems.push_back(c.name + " (" + r.worst + ")");

    auto mutated = [&c] {
      auto targets = c.analytic();
      for (auto& t : targets) t.analytic.scale(1.01);
      return targets;
    };
    const GradCheckReport m = gradient_check(c.loss, mutated, opt);
    if (!m.passed) ++mutants_caught;
    else problems.push_back(c.name + " mutant survived");
    note(c.name + ": max rel err " + std::to_string(r.max_rel_error) + ", " + std::to_string(r.checked) +
         " coords");
  }
  const double secs = seconds_since(start);
  std::ostringstream msg;
  msg << passed << "/" << cases.size() << " units pass at rel tol 1e-4 (" << checked << " coords, " << skipped
      << " kink-skipped); mutants caught " << mutants_caught << "/" << cases.size() << "; " << secs << " s";
  for (const auto& p : problems) msg << "; " << p;
  return {passed == cases.size() && mutants_caught == cases.size() && secs < 120.0, msg.str()};
}

// ---------------------------------------------------------------------------

Outcome nnmf() {
  const auto start = Clock::now();
  std::size_t monotone = 0;
  double worst_rise = 0;
  for (int problem = 0; problem < 100; ++problem) {
    Rng rng(derive_seed(problem, "acceptance.nnmf"));
    Eigen::MatrixXd A(20, 30);
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      for (Eigen::Index j = 0; j < A.cols(); ++j) A(i, j) = rng.uniform() < 0.5 ? 0.0 : rng.uniform();
    const NnmfFit fit = nnmf_fit(A, {5, 100, 0.0, static_cast<std::uint64_t>(problem)});
    const auto& h = fit.model.loss_history;
    bool ok = true;
    for (std::size_t k = 1; k < h.size(); ++k) {
      const double rise = h[k] - h[k - 1];
      worst_rise = std::max(worst_rise, rise);
      if (rise > 1e-12) ok = false;
    }
    if (ok) ++monotone;
  }

  Rng rng(derive_seed(1, "acceptance.rank1"));
  Eigen::VectorXd u(20);
  Eigen::RowVectorXd v(30);
  for (auto& x : u) x = 0.1 + rng.uniform();
  for (auto& x : v) x = 0.1 + rng.uniform();
  const Eigen::MatrixXd A = u * v;
  const NnmfFit fit = nnmf_fit(A, {1, 1000, 0.0, 1});
  const double recon = (A - fit.W * fit.model.H).norm() / A.norm();
  const double secs = seconds_since(start);
  std::ostringstream msg;
  msg << monotone << "/100 random 20x30 fits non-increasing (largest step up " << worst_rise
      << "); rank-1 relative reconstruction error " << recon << "; " << secs << " s";
  return {monotone == 100 && recon < 1e-6 && secs < 30.0, msg.str()};
}

}  // namespace

std::vector<Criterion> math_criteria() {
  return {{"indicator_grid", indicator_grid},
          {"rae_identities", rae_identities},
          {"gradient_suite", gradient_suite},
          {"nnmf", nnmf}};
}

}  // namespace hf::acceptance
