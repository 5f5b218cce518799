#include <cmath>
#include <random>

#include "doctest.h"
#include "op_cases.hpp"
#include "stgan/autograd.hpp"
#include "stgan/optim.hpp"
#include "stgan/tensor.hpp"

using namespace stgan::nd;

TEST_CASE("forward op examples") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);

  auto m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  auto eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  auto prod = matmul(m, eye);
  CHECK(std::vector<double>(prod.data().begin(), prod.data().end()) ==
        std::vector<double>{1, 2, 3, 4});

  auto sm = softmax(Tensor::vector({0, 0, 0}));
  for (double v : sm.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("shape mismatch names both shapes") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({4, 2});
  try {
    (void)matmul(a, b);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[4, 2]") != std::string::npos);
  }
  CHECK_THROWS_AS((void)add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), std::invalid_argument);
}

TEST_CASE("log floors its input") {
  auto y = log(Tensor::vector({0.0, -1.0}));
  CHECK(y[0] == doctest::Approx(std::log(1e-12)));
  CHECK(std::isfinite(y[1]));
}

TEST_CASE("backward examples") {
  auto x = Tensor::scalar(3.0, true);
  backward(mul(x, x));
  CHECK(x.grad()[0] == doctest::Approx(6.0));

  auto z = Tensor::scalar(0.0, true);
  backward(sigmoid(z));
  CHECK(z.grad()[0] == doctest::Approx(0.25));

  CHECK_THROWS_AS(backward(mul(Tensor::vector({1, 2}, true), Tensor::vector({1, 1}))),
                  std::invalid_argument);
}

TEST_CASE("backward zeroes grads unless accumulating") {
  auto x = Tensor::scalar(2.0, true);
  backward(scale(x, 3.0));
  backward(scale(x, 3.0));
  CHECK(x.grad()[0] == doctest::Approx(3.0));
  backward(scale(x, 3.0), true);
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("every reachable parameter gets a grad") {
  auto a = Tensor::vector({1.0, 2.0}, true);
  auto unused_branch = Tensor::vector({5.0, 5.0}, true);
  auto loss = sum(add(a, scale(unused_branch, 0.0)));
  backward(loss);
  CHECK(a.has_grad());
  CHECK(unused_branch.has_grad());
}

TEST_CASE("graph records inputs before users") {
  auto w = Tensor::matrix(2, 2, {1, 2, 3, 4}, true);
  auto x = Tensor::matrix(1, 2, {1, 1});
  auto loss = sum(tanh(matmul(x, w)));
  auto graph = Graph::trace(loss);
  CHECK(graph.size() == 5);
  std::vector<std::uint64_t> seen;
  for (const auto& e : graph.entries()) {
    for (auto in : e.inputs) CHECK(std::find(seen.begin(), seen.end(), in) != seen.end());
    seen.push_back(e.id);
  }
}

TEST_CASE("no-grad mode records nothing") {
  auto w = Tensor::vector({1.0}, true);
  NoGradGuard guard;
  auto y = scale(w, 2.0);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.inputs().empty());
}

TEST_CASE("gradients of every op match central differences on 10 seeds") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (auto& c : stgan::testing::op_cases(seed)) {
      auto report = finite_difference_check(c.params, c.loss);
      INFO(c.name << " seed " << seed << " analytic " << report.analytic << " numeric "
                  << report.numeric);
      CHECK(report.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("finite-difference check is exact on a linear loss") {
  auto w = Tensor::vector({0.3, -1.2, 2.0}, true);
  auto x = Tensor::vector({1.5, 0.25, -0.75});
  auto report = finite_difference_check(std::vector<Tensor>{w}, [&] { return sum(mul(w, x)); });
  CHECK(report.max_rel_error < 1e-9);
}

TEST_CASE("softmax cross-entropy passes the finite-difference check") {
  std::mt19937_64 rng(11);
  auto logits = stgan::testing::rand_param({4, 6}, rng, -2, 2);
  auto onehot = Tensor::zeros({4, 6});
  for (std::size_t i = 0; i < 4; ++i) onehot.mutable_data()[i * 6 + (i * 5) % 6] = 1.0;
  auto report = finite_difference_check(std::vector<Tensor>{logits},
                                        [&] { return neg(sum(mul(log_softmax(logits), onehot))); });
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("zero-norm rows have a finite subgradient") {
  auto x = Tensor::matrix(2, 2, {0, 0, 3, 4}, true);
  backward(sum(row_l2_norm(x)));
  auto g = x.grad();
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == doctest::Approx(0.6));
  CHECK(g[3] == doctest::Approx(0.8));
}

TEST_CASE("adam examples") {
  {
    auto p = Tensor::vector({0.0}, true);
    Adam opt({p}, {.lr = 1e-3});
    p.zero_grad();
    p.mutable_grad()[0] = 0.5;
    opt.step();
    CHECK(p[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(p.grad()[0] == 0.5);
  }
  {
    auto p = Tensor::vector({1.0, -2.0}, true);
    Adam opt({p});
    for (int i = 0; i < 5; ++i) {
      p.zero_grad();
      opt.step();
    }
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);
    CHECK(opt.steps() == 5);
  }
  {
    // Hand-unrolled recurrence: both steps have unit bias-corrected ratio.
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.1;
    double m = 0, v = 0, expected = 0;
    for (int t = 1; t <= 2; ++t) {
      m = b1 * m + (1 - b1);
      v = b2 * v + (1 - b2);
      expected -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    }
    auto p = Tensor::vector({0.0}, true);
    Adam opt({p}, {.lr = lr});
    for (int t = 0; t < 2; ++t) {
      p.zero_grad();
      p.mutable_grad()[0] = 1.0;
      opt.step();
    }
    CHECK(p[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(p[0] == doctest::Approx(-0.2).epsilon(1e-6));
  }
  {
    auto p = Tensor::vector({0.0}, true);
    Adam opt({p});
    CHECK_THROWS_AS(opt.step(), std::runtime_error);
  }
}

TEST_CASE("global norm clipping") {
  auto p = Tensor::vector({0, 0}, true);
  std::vector<Tensor> ps{p};
  auto set = [&](double a, double b) {
    p.zero_grad();
    p.mutable_grad()[0] = a;
    p.mutable_grad()[1] = b;
  };
  set(3, 4);
  CHECK(clip_global_norm(ps, 5.0) == doctest::Approx(5.0));
  CHECK(p.grad()[0] == 3.0);
  set(3, 4);
  CHECK(clip_global_norm(ps, 2.5) == doctest::Approx(5.0));
  CHECK(p.grad()[0] == doctest::Approx(1.5));
  CHECK(p.grad()[1] == doctest::Approx(2.0));
  set(0, 0);
  CHECK(clip_global_norm(ps, 1.0) == 0.0);
  set(NAN, 1);
  CHECK_THROWS_AS(clip_global_norm(ps, 1.0), std::runtime_error);
}

TEST_CASE("clipping twice equals clipping once") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist(0, 4);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = Tensor::zeros({3}, true);
    auto b = Tensor::zeros({2, 2}, true);
    std::vector<Tensor> ps{a, b};
    for (auto p : ps) {
      p.zero_grad();
      for (double& g : p.mutable_grad()) g = dist(rng);
    }
    clip_global_norm(ps, 1.5);
    std::vector<double> once(a.grad().begin(), a.grad().end());
    clip_global_norm(ps, 1.5);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(a.grad()[i] == doctest::Approx(once[i]).epsilon(1e-14));
  }
}

TEST_CASE("identical seeds give bit-identical outputs and grads") {
  auto run = [] {
    std::mt19937_64 rng(42);
    auto w = uniform_param({6, 5}, 0.08, rng);
    auto x = normal_tensor({3, 6}, rng);
    auto loss = sum(log_softmax(tanh(matmul(x, w))));
    backward(loss);
    std::vector<double> out{loss.item()};
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    return out;
  };
  CHECK(run() == run());
}
