#include <doctest.h>

#include <cmath>

#include "headline_forge/adam.hpp"
#include "headline_forge/error.hpp"
#include "headline_forge/losses.hpp"
#include "support.hpp"

using namespace hf;
using namespace hf::testing;

TEST_SUITE("losses") {
  TEST_CASE("mse values") {
    Tensor p({2, 2}, {0.3, 0.7, 0.1, 0.9});
    CHECK(mse(p, p).value == 0.0);
    CHECK(mse(Tensor({1, 2}, {1, 0}), Tensor({1, 2}, {0, 1})).value == 1.0);
  }

  TEST_CASE("cross entropy values") {
    Tensor u({3, 4}, 0.25);
    std::vector<int> labels = {0, 2, 3};
    CHECK(near(cross_entropy(u, labels).value, std::log(4.0), 1e-12));
    Tensor zero_p({1, 2}, {0.0, 1.0});
    std::vector<int> first = {0};
    CHECK(near(cross_entropy(zero_p, first).value, -std::log(kProbabilityFloor), 1e-9));
  }

  TEST_CASE("loss gradients") {
    Rng rng(1);
    Tensor p = random_tensor({3, 4}, rng, 0.05, 0.95);
    Tensor t = random_tensor({3, 4}, rng, 0.0, 1.0);
    std::vector<int> labels = {1, 3, 0};
    CHECK(gradient_check([&] { return mse(p, t).value; },
                         [&] { return std::vector<GradTarget>{{"p", &p, mse(p, t).grad}}; })
              .passed);
    CHECK(gradient_check([&] { return cross_entropy(p, labels).value; },
                         [&] { return std::vector<GradTarget>{{"p", &p, cross_entropy(p, labels).grad}}; })
              .passed);
  }
}

TEST_SUITE("adam") {
  TEST_CASE("first step moves by about lr against the gradient sign") {
    Param p("p", Tensor({3}, {1.0, -2.0, 0.5}));
    p.grad = Tensor({3}, {0.3, -4.0, 1e-3});
    Adam adam;
    std::vector<Param*> ps = {&p};
    adam.step(ps);
    const double lr = 1e-3, eps = 1e-8;
    CHECK(near(p.value[0], 1.0 - lr * 0.3 / (0.3 + eps), 1e-15));
    CHECK(near(p.value[1], -2.0 + lr * 4.0 / (4.0 + eps), 1e-15));
    CHECK(near(p.value[2], 0.5 - lr * 1e-3 / (1e-3 + eps), 1e-15));
  }

  TEST_CASE("zero gradient leaves a fresh parameter in place") {
    Param p("p", Tensor({2}, {0.25, -0.75}));
    Adam adam;
    std::vector<Param*> ps = {&p};
    adam.step(ps);
    CHECK(p.value == Tensor({2}, {0.25, -0.75}));
  }

  TEST_CASE("two steps on theta squared match a scalar trace") {
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double theta = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
      const double g = 2.0 * theta;
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
      theta -= lr * mh / (std::sqrt(vh) + eps);
    }
    Param p("theta", Tensor({1}, {1.0}));
    AdamConfig cfg;
    cfg.lr = lr;
    Adam adam(cfg);
    std::vector<Param*> ps = {&p};
    for (int t = 0; t < 2; ++t) {
      p.grad = Tensor({1}, {2.0 * p.value[0]});
      adam.step(ps);
    }
    CHECK(near(p.value[0], theta, 1e-15));
    CHECK(adam.steps() == 2);
  }
}

TEST_SUITE("gradcheck") {
  TEST_CASE("nondeterministic objective is refused") {
    Tensor x({2}, {1.0, 2.0});
    int calls = 0;
    auto loss = [&] { return x[0] + 0.001 * (++calls); };
    auto analytic = [&] { return std::vector<GradTarget>{{"x", &x, Tensor({2}, {1.0, 0.0})}}; };
    try {
      gradient_check(loss, analytic);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::nondeterministic);
    }
  }

  TEST_CASE("relu passes away from its kink") {
    Rng rng(2);
    Tensor x = random_tensor({40}, rng, -1, 1);
    for (double& v : x.values())
      if (std::abs(v) <= 1e-3) v = 0.25;
    Tensor w = random_tensor({40}, rng);
    auto report = gradient_check([&] { return probe(relu(x), w); },
                                 [&] { return std::vector<GradTarget>{{"x", &x, relu_backward(x, w)}}; });
    CHECK(report.passed);
    CHECK(report.checked == 40);
  }

  TEST_CASE("perturbed values are restored") {
    Tensor x({3}, {0.1, 0.2, 0.3});
    const Tensor before = x;
    gradient_check([&] { return x[0] * x[1] + x[2]; },
                   [&] { return std::vector<GradTarget>{{"x", &x, Tensor({3}, {x[1], x[0], 1.0})}}; });
    CHECK(x == before);
  }
}
