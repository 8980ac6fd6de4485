#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gradcheck.hpp"
#include "pens/error.hpp"
#include "pens/optim.hpp"
#include "pens/tensor.hpp"

using namespace pens;
using pens::testing::random_tensor;

namespace {

std::vector<Real> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("tensor construction") {
  const auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.shape() == Shape{2, 3});
  CHECK(t.size() == 6);
  CHECK(t.dim(1) == 3);
  CHECK_FALSE(t.requires_grad());
  CHECK(t.grad().empty());
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK(Tensor::scalar(2.5f).item() == 2.5f);
  CHECK_THROWS_AS(t.item(), ShapeError);
  const auto z = Tensor::zeros({4}, true);
  CHECK(z.grad().size() == 4);
}

TEST_CASE("softmax examples and invariants") {
  CHECK(values(softmax(Tensor::from({1, 2}, {0, 0}), 1)) == std::vector<Real>{0.5f, 0.5f});
  Rng rng(1);
  const auto x = random_tensor({8, 7}, rng, -50, 50, false);
  const auto p = softmax(x, 1);
  for (std::size_t r = 0; r < 8; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 7; ++c) {
      const Real v = p.data()[r * 7 + c];
      CHECK(v >= 0);
      CHECK(v <= 1);
      total += v;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
  const auto moderate = softmax(random_tensor({4, 5}, rng, -3, 3, false), 1);
  for (Real v : moderate.data()) {
    CHECK(v > 0);
    CHECK(v < 1);
  }
}

TEST_CASE("conv1d output length is L - k + 1") {
  const auto x = Tensor::zeros({1, 10, 3});
  const auto k = Tensor::zeros({5, 3, 2});
  const auto b = Tensor::zeros({2});
  CHECK(conv1d(x, k, b).shape() == Shape{1, 6, 2});
  CHECK_THROWS_AS(conv1d(x, Tensor::zeros({5, 4, 2}), b), ShapeError);
  CHECK_THROWS_AS(conv1d(Tensor::zeros({1, 4, 3}), k, b), ShapeError);
}

TEST_CASE("conv1d is a valid correlation") {
  const auto x = Tensor::from({1, 4, 1}, {1, 2, 3, 4});
  const auto k = Tensor::from({2, 1, 1}, {10, 1});
  const auto b = Tensor::from({1}, {0.5f});
  CHECK(values(conv1d(x, k, b)) == std::vector<Real>{12.5f, 23.5f, 34.5f});
}

TEST_CASE("cross entropy of a matching one-hot prediction is zero") {
  const auto p = Tensor::from({2, 3}, {0, 1, 0, 1, 0, 0});
  CHECK(cross_entropy(p, p).item() == 0.0f);
  const auto uniform = Tensor::full({1, 4}, 0.25f);
  const auto target = Tensor::from({1, 4}, {0, 0, 1, 0});
  CHECK(cross_entropy(uniform, target).item() == doctest::Approx(std::log(4.0)).epsilon(1e-6));
  const auto zero = Tensor::from({1, 2}, {0, 1});
  CHECK(std::isfinite(cross_entropy(zero, Tensor::from({1, 2}, {1, 0})).item()));
}

TEST_CASE("backward examples") {
  auto x = Tensor::from({1}, {3}, true);
  auto y = Tensor::from({1}, {4}, true);
  sum(mul(x, y)).backward();
  CHECK(x.grad()[0] == 4.0f);
  CHECK(y.grad()[0] == 3.0f);

  sum(mul(x, y)).backward();
  CHECK(x.grad()[0] == 8.0f);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0f);

  auto unused = Tensor::from({2}, {1, 2}, true);
  auto a = Tensor::from({2}, {1, 1}, true);
  sum(a).backward();
  CHECK(values(Tensor(unused).detach()) == std::vector<Real>{1, 2});
  CHECK(unused.grad()[0] == 0.0f);
  CHECK(unused.grad()[1] == 0.0f);

  CHECK_THROWS_AS(mul(a, a).backward(), ShapeError);
}

TEST_CASE("shared subexpressions accumulate gradient once per use") {
  auto x = Tensor::from({1}, {2}, true);
  const auto y = mul(x, x);
  sum(add(y, y)).backward();
  CHECK(x.grad()[0] == 8.0f);
}

TEST_CASE("broadcast add reduces gradients to the input shapes") {
  Rng rng(2);
  auto a = random_tensor({2, 3, 4}, rng);
  auto b = random_tensor({3, 4}, rng);
  auto c = random_tensor({4}, rng);
  sum(add(add(a, b), c)).backward();
  CHECK(b.grad().size() == 12);
  CHECK(c.grad().size() == 4);
  for (Real g : b.grad()) CHECK(g == 2.0f);
  for (Real g : c.grad()) CHECK(g == 6.0f);
  CHECK_THROWS_AS(add(a, random_tensor({3, 3}, rng)), ShapeError);
}

TEST_CASE("shape errors name the op and shapes") {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    CHECK(what.find("matmul") != std::string::npos);
    CHECK(what.find("[2,3]") != std::string::npos);
  }
}

TEST_CASE("no op produces NaN or Inf on inputs in [-50, 50]") {
  Rng rng(3);
  const auto x = random_tensor({6, 5}, rng, -50, 50, false);
  const auto edges = Tensor::from({1, 5}, {-50, 50, 0, -50, 50});
  for (const auto& in : {x, edges}) {
    const auto p = softmax(in, 1);
    const auto t = Tensor::full(in.shape(), 0.2f);
    for (const auto& out : {sigmoid(in), tanh(in), relu(in), p, cross_entropy(p, t)}) {
      for (Real v : out.data()) CHECK(std::isfinite(v));
    }
  }
  auto logits = random_tensor({3, 4}, rng, -50, 50);
  const auto target = Tensor::from({3, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1});
  cross_entropy(softmax(logits, 1), target).backward();
  for (Real g : logits.grad()) CHECK(std::isfinite(g));
}

TEST_CASE("ops match central differences in 32-bit mode") {
  for (const auto& c : pens::testing::gradient_cases(1)) {
    CAPTURE(c.name);
    const auto r = pens::testing::grad_check(c, 1e-3, 1e-1);
    INFO(r.worst);
    CHECK(r.max_error <= 1e-2);
  }
}

TEST_CASE("embedding gather scatters into gathered rows only") {
  auto m = Tensor::from({4, 2}, {1, 1, 2, 2, 3, 3, 4, 4}, true);
  const std::vector<std::int32_t> idx = {2, 0, 2};
  const auto out = embedding_gather(m, idx, {3}, std::size_t{0});
  CHECK(values(out) == std::vector<Real>{3, 3, 1, 1, 3, 3});
  sum(out).backward();
  CHECK(values(Tensor::from({4, 2}, {m.grad().begin(), m.grad().end()})) ==
        std::vector<Real>{0, 0, 0, 0, 2, 2, 0, 0});
  CHECK_THROWS_AS(embedding_gather(m, std::vector<std::int32_t>{4}, {1}), Error);
}

TEST_CASE("Adam first step moves by the learning rate") {
  auto p = Tensor::from({1}, {1.0f}, true);
  Adam adam({p}, {0.1, 0.9, 0.999, 1e-8});
  p.grad()[0] = 1.0f;
  adam.step();
  // m = 0.1, v = 0.001; m_hat = 1, v_hat = 1; step = 0.1 * 1 / (1 + 1e-8)
  const double expected = 1.0 - 0.1 / (1.0 + 1e-8);
  CHECK(std::abs(p.data()[0] - expected) <= 1e-6);
  CHECK(std::abs((1.0 - p.data()[0]) - 0.1) <= 1e-6);
  CHECK(adam.steps() == 1);
}

TEST_CASE("Adam with zero gradient leaves parameters unchanged") {
  auto p = Tensor::from({3}, {1, -2, 3}, true);
  Adam adam({p});
  p.grad()[0] = 1.0f;
  adam.step();
  const auto after_first = values(p);
  const Real m_before = adam.first_moments()[0][0];
  adam.zero_grad();
  for (int i = 0; i < 3; ++i) adam.step();
  CHECK(values(p)[1] == -2.0f);
  CHECK(values(p)[2] == 3.0f);
  CHECK(adam.first_moments()[0][0] == doctest::Approx(m_before * 0.9 * 0.9 * 0.9));
  CHECK(adam.first_moments()[0][1] == 0.0f);
  CHECK(after_first[1] == -2.0f);
}

TEST_CASE("Adam runs are deterministic") {
  const auto run = [] {
    Rng rng(9);
    auto w = random_tensor({3, 2}, rng);
    const auto x = random_tensor({4, 3}, rng, -1, 1, false);
    Adam adam({w}, {0.01});
    for (int i = 0; i < 20; ++i) {
      adam.zero_grad();
      sum(mul(matmul(x, w), matmul(x, w))).backward();
      adam.step();
    }
    return values(w);
  };
  CHECK(run() == run());
}

TEST_CASE("Adam moment buffers match parameter shapes") {
  auto a = Tensor::zeros({2, 3}, true);
  auto b = Tensor::zeros({5}, true);
  Adam adam({a, b});
  REQUIRE(adam.first_moments().size() == 2);
  CHECK(adam.first_moments()[0].size() == 6);
  CHECK(adam.second_moments()[1].size() == 5);
}
