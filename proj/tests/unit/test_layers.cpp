#include <doctest.h>

#include <cmath>

#include "headline_forge/error.hpp"
#include "headline_forge/layers.hpp"
#include "support.hpp"

using namespace hf;
using namespace hf::testing;

TEST_SUITE("layers") {
  TEST_CASE("dense identity and hand example") {
    Rng rng(1);
    Dense d("d", 2, 2, rng);
    d.weight.value = Tensor({2, 2}, {1, 0, 0, 1});
    d.bias.value = Tensor({2}, {0, 0});
    Tensor x({3, 2}, {1, -2, 3, 4, 0.5, 7});
    CHECK(d.forward(x) == x);
    d.bias.value = Tensor({2}, {3, 4});
    Tensor y = d.forward(Tensor({1, 2}, {1, 2}));
    CHECK(y == Tensor({1, 2}, {4, 6}));
    CHECK_THROWS_AS(d.forward(Tensor({1, 3})), Error);
  }

  TEST_CASE("dense gradients and mutation") {
    Rng rng(2);
    Dense d("d", 4, 3, rng);
    Tensor x = random_tensor({5, 4}, rng);
    Tensor w = random_tensor({5, 3}, rng);
    Tensor dx;
    auto loss = [&] { return probe(d.forward(x), w); };
    auto analytic = [&] {
      zero(d.params());
      dx = d.backward(x, w);
      auto t = targets_of(d.params());
      t.push_back({"x", &x, dx});
      return t;
    };
    auto report = gradient_check(loss, analytic);
    CHECK(report.passed);
    CHECK(report.checked == 4 * 3 + 3 + 5 * 4);

    auto mutated = [&] {
      auto t = analytic();
      for (auto& g : t) g.analytic.scale(1.01);
      return t;
    };
    CHECK_FALSE(gradient_check(loss, mutated).passed);
  }

  TEST_CASE("activation values") {
    Tensor x({1, 3}, {-1, 0, 2});
    CHECK(relu(x) == Tensor({1, 3}, {0, 0, 2}));
    CHECK(sigmoid(Tensor({1}, {0.0}))[0] == 0.5);
    CHECK(hf::tanh(Tensor({1}, {0.0}))[0] == 0.0);
    Tensor s = softmax(Tensor({1, 2}, {0.0, std::log(2.0)}));
    CHECK(near(s[0], 1.0 / 3.0, 1e-12));
    CHECK(near(s[1], 2.0 / 3.0, 1e-12));
  }

  TEST_CASE("softmax shift invariance and normalization") {
    Rng rng(3);
    Tensor x = random_tensor({6, 4}, rng, -5, 5);
    Tensor shifted = x;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 4; ++j) shifted.at(i, j) += 123.0 * (i + 1);
    Tensor a = softmax(x), b = softmax(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(near(a[i], b[i], 1e-12));
    for (std::size_t i = 0; i < 6; ++i) {
      double sum = 0;
      for (double v : a.row(i)) sum += v;
      CHECK(near(sum, 1.0, 1e-12));
    }
  }

  TEST_CASE("activation gradients") {
    Rng rng(4);
    Tensor x = random_tensor({3, 5}, rng, -2, 2);
    // keep relu away from its kink
    for (double& v : x.values())
      if (std::abs(v) < 1e-3) v = 0.5;
    Tensor w = random_tensor({3, 5}, rng);
    struct Case {
      const char* name;
      std::function<Tensor(const Tensor&)> f;
      std::function<Tensor(const Tensor&, const Tensor&)> back;  // (x, y) -> dx
    };
    std::vector<Case> cases = {
        {"relu", [](const Tensor& t) { return relu(t); },
         [&](const Tensor& in, const Tensor&) { return relu_backward(in, w); }},
        {"sigmoid", [](const Tensor& t) { return sigmoid(t); },
         [&](const Tensor&, const Tensor& y) { return sigmoid_backward(y, w); }},
        {"tanh", [](const Tensor& t) { return hf::tanh(t); },
         [&](const Tensor&, const Tensor& y) { return tanh_backward(y, w); }},
        {"softmax", [](const Tensor& t) { return softmax(t); },
         [&](const Tensor&, const Tensor& y) { return softmax_backward(y, w); }},
    };
    for (const auto& c : cases) {
      CAPTURE(c.name);
      auto report = gradient_check([&] { return probe(c.f(x), w); },
                                   [&] { return std::vector<GradTarget>{{"x", &x, c.back(x, c.f(x))}}; });
      CHECK(report.passed);
    }
  }

  TEST_CASE("embedding lookup rules") {
    Rng rng(5);
    Embedding e("emb", 6, 4, rng);
    IdBatch ids{1, 3, {0, 3, 3}};
    Tensor y = e.forward(ids);
    CHECK(y.shape() == Shape{1, 3, 4});
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(y.at(0, 0, k) == 0.0);
      CHECK(y.at(0, 1, k) == y.at(0, 2, k));
      CHECK(y.at(0, 1, k) == e.table.value.at(3, k));
    }
    CHECK_THROWS_AS(e.forward(IdBatch{1, 1, {6}}), Error);
  }

  TEST_CASE("embedding gradient is the sum over positions") {
    Rng rng(6);
    Embedding e("emb", 5, 3, rng);
    IdBatch ids{2, 3, {2, 0, 2, 4, 2, 1}};
    Tensor dy = random_tensor({2, 3, 3}, rng);
    e.table.zero_grad();
    e.backward(ids, dy);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(near(e.table.grad.at(2, k), dy.at(0, 0, k) + dy.at(0, 2, k) + dy.at(1, 1, k), 1e-15));
      CHECK(e.table.grad.at(0, k) == 0.0);
      CHECK(e.table.grad.at(3, k) == 0.0);
    }
    auto report = gradient_check([&] { return probe(e.forward(ids), dy); },
                                 [&] {
                                   e.table.zero_grad();
                                   e.backward(ids, dy);
                                   return targets_of(e.params());
                                 });
    CHECK(report.passed);
  }

  TEST_CASE("batch norm forward rules") {
    BatchNorm bn("bn", 3);
    bn.beta.value = Tensor({3}, {0.5, -1, 2});
    Tensor same({4, 3});
    for (std::size_t i = 0; i < 4; ++i) {
      same.at(i, 0) = 1;
      same.at(i, 1) = 2;
      same.at(i, 2) = 3;
    }
    BatchNormCache cache;
    Tensor y = bn.forward_train(same, cache);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(y.at(i, j) == bn.beta.value[j]);
    CHECK_THROWS_AS(bn.forward_train(Tensor({1, 3}), cache), Error);
  }

  TEST_CASE("batch norm moments and running statistics") {
    Rng rng(7);
    BatchNorm bn("bn", 5);
    Tensor x = random_tensor({16, 5}, rng, -3, 7);
    BatchNormCache cache;
    Tensor y = bn.forward_train(x, cache);
    for (std::size_t j = 0; j < 5; ++j) {
      double mean = 0, var = 0, xmean = 0, xvar = 0;
      for (std::size_t i = 0; i < 16; ++i) {
        mean += y.at(i, j);
        xmean += x.at(i, j);
      }
      mean /= 16;
      xmean /= 16;
      for (std::size_t i = 0; i < 16; ++i) {
        var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
        xvar += (x.at(i, j) - xmean) * (x.at(i, j) - xmean);
      }
      var /= 16;
      xvar /= 16;
      CHECK(near(mean, 0.0, 1e-9));
      CHECK(near(var, xvar / (xvar + BatchNorm::kEpsilon), 1e-9));
      CHECK(near(var, 1.0, 1e-4));
    }
    bn.update_running(cache);
    double xm = 0;
    for (std::size_t i = 0; i < 16; ++i) xm += x.at(i, 0);
    CHECK(near(bn.running_mean[0], 0.1 * xm / 16, 1e-12));
  }

  TEST_CASE("batch norm infer mode is affine") {
    Rng rng(8);
    BatchNorm bn("bn", 2);
    bn.running_mean = Tensor({2}, {1, -1});
    bn.running_var = Tensor({2}, {4, 0.25});
    bn.gamma.value = Tensor({2}, {2, 3});
    bn.beta.value = Tensor({2}, {0.5, 0});
    Tensor x({1, 2}, {3, 0});
    Tensor y = bn.forward_infer(x);
    CHECK(near(y[0], 2 * (3 - 1) / std::sqrt(4 + 1e-5) + 0.5, 1e-12));
    CHECK(near(y[1], 3 * (0 + 1) / std::sqrt(0.25 + 1e-5), 1e-12));
    CHECK(bn.forward_infer(x) == y);
  }

  TEST_CASE("batch norm gradients") {
    Rng rng(9);
    BatchNorm bn("bn", 3);
    bn.gamma.value = random_tensor({3}, rng, 0.5, 1.5);
    bn.beta.value = random_tensor({3}, rng);
    Tensor x = random_tensor({6, 3}, rng, -2, 2);
    Tensor w = random_tensor({6, 3}, rng);
    auto report = gradient_check(
        [&] {
          BatchNormCache c;
          return probe(bn.forward_train(x, c), w);
        },
        [&] {
          BatchNormCache c;
          bn.forward_train(x, c);
          zero(bn.params());
          Tensor dx = bn.backward(c, w);
          auto t = targets_of(bn.params());
          t.push_back({"x", &x, dx});
          return t;
        });
    CHECK(report.passed);
  }

  TEST_CASE("dropout rules") {
    Rng rng(10);
    Tensor x = random_tensor({4, 5}, rng);
    DropoutMask mask;
    CHECK(dropout_forward(x, 0.0, Mode::train, &rng, mask) == x);
    CHECK(dropout_forward(x, 0.7, Mode::infer, nullptr, mask) == x);
    CHECK_THROWS_AS(dropout_forward(x, 1.0, Mode::train, &rng, mask), Error);
    CHECK_THROWS_AS(dropout_forward(x, -0.1, Mode::train, &rng, mask), Error);

    Tensor y = dropout_forward(x, 0.3, Mode::train, &rng, mask);
    Tensor dy = random_tensor({4, 5}, rng);
    Tensor dx = dropout_backward(mask, dy);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool kept = y[i] != 0.0;
      CHECK(dx[i] == doctest::Approx(kept ? dy[i] / 0.7 : 0.0));
    }
  }

  TEST_CASE("dropout preserves the mean") {
    Rng rng(11);
    Tensor x({100000}, 2.5);
    DropoutMask mask;
    Tensor y = dropout_forward(x, 0.2, Mode::train, &rng, mask);
    double mean = 0;
    for (double v : y.values()) mean += v;
    mean /= static_cast<double>(y.size());
    CHECK(std::abs(mean - 2.5) / 2.5 < 0.01);
  }

  TEST_CASE("maxpool values and shapes") {
    Tensor c({1, 1, 4, 4}, 3.0);
    Tensor pc = maxpool2d_forward(c, 2, 2, nullptr);
    CHECK(pc == Tensor({1, 1, 2, 2}, 3.0));
    CHECK(maxpool2d_forward(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2, nullptr) == Tensor({1, 1, 1, 1}, {4}));
    CHECK(maxpool2d_forward(Tensor({2, 3, 5, 5}), 2, 2, nullptr).shape() == Shape{2, 3, 3, 3});
  }

  TEST_CASE("maxpool routes gradient to the first maximum") {
    Tensor x({1, 1, 2, 2}, {5, 5, 1, 5});
    PoolCache cache;
    maxpool2d_forward(x, 2, 2, &cache);
    Tensor dx = maxpool2d_backward(cache, Tensor({1, 1, 1, 1}, {2.0}));
    CHECK(dx == Tensor({1, 1, 2, 2}, {2, 0, 0, 0}));
  }

  TEST_CASE("maxpool gradients away from ties") {
    Rng rng(12);
    Tensor x = random_tensor({2, 2, 5, 5}, rng);
    Tensor w = random_tensor({2, 2, 3, 3}, rng);
    GradCheckOptions opt;
    opt.skip_kinks = true;
    auto report = gradient_check([&] { return probe(maxpool2d_forward(x, 2, 2, nullptr), w); },
                                 [&] {
                                   PoolCache c;
                                   maxpool2d_forward(x, 2, 2, &c);
                                   return std::vector<GradTarget>{{"x", &x, maxpool2d_backward(c, w)}};
                                 },
                                 opt);
    CHECK(report.passed);
  }
}
