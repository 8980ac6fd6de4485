#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "pens/error.hpp"
#include "pens/layers.hpp"

using namespace pens;
using pens::testing::random_tensor;

namespace {

std::vector<Real> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

std::vector<Real> slice_values(const Tensor& t, std::size_t from, std::size_t count) {
  return {t.data().begin() + static_cast<std::ptrdiff_t>(from),
          t.data().begin() + static_cast<std::ptrdiff_t>(from + count)};
}

Tensor sequence(const std::vector<std::vector<Real>>& steps) {
  std::vector<Real> flat;
  for (const auto& s : steps) flat.insert(flat.end(), s.begin(), s.end());
  return Tensor::from({1, steps.size(), steps.front().size()}, flat);
}

}  // namespace

TEST_CASE("embedding layer looks up rows") {
  auto m = Tensor::from({3, 2}, {0, 0, 1, 2, 3, 4});
  Embedding layer(m, true);
  const std::vector<std::int32_t> idx = {2, 0};
  const auto out = layer.forward(idx, 1, 2);
  CHECK(out.shape() == Shape{1, 2, 2});
  CHECK(values(out) == std::vector<Real>{3, 4, 0, 0});

  const std::vector<std::int32_t> twice = {1, 2, 1, 2};
  const auto same = layer.forward(twice, 2, 2);
  CHECK(slice_values(same, 0, 4) == slice_values(same, 4, 4));
  CHECK_THROWS_AS(layer.forward(std::vector<std::int32_t>{3}, 1, 1), Error);
  CHECK_THROWS_AS(layer.forward(std::vector<std::int32_t>{1, 2, 1}, 1, 2), Error);
}

TEST_CASE("embedding gradient reaches only gathered rows and never the pad row") {
  auto m = Tensor::from({4, 2}, {1, 1, 1, 1, 1, 1, 1, 1});
  Embedding layer(m, true);
  const std::vector<std::int32_t> idx = {0, 2, 2, 0};
  sum(layer.forward(idx, 2, 2)).backward();
  const auto g = layer.matrix().grad();
  CHECK(std::vector<Real>(g.begin(), g.end()) == std::vector<Real>{0, 0, 0, 0, 2, 2, 0, 0});

  Embedding frozen(Tensor::from({2, 1}, {0, 5}), false);
  CHECK_FALSE(frozen.trainable());
  CHECK(frozen.matrix().grad().empty());
}

TEST_CASE("LSTM with zero weights outputs zero") {
  LSTMCell cell(Tensor::zeros({3, 8}), Tensor::zeros({2, 8}), Tensor::zeros({8}));
  Rng rng(1);
  const auto x = random_tensor({4, 3}, rng, -5, 5, false);
  const auto s = cell(x, cell.initial_state(4));
  for (Real v : s.h.data()) CHECK(v == 0.0f);
  for (Real v : s.c.data()) CHECK(v == 0.0f);
}

TEST_CASE("LSTM outputs stay inside (-1, 1)") {
  Rng rng(2);
  LSTMCell cell(3, 5, rng);
  auto state = cell.initial_state(2);
  for (int t = 0; t < 20; ++t) state = cell(random_tensor({2, 3}, rng, -10, 10, false), state);
  for (Real v : state.h.data()) {
    CHECK(v > -1.0f);
    CHECK(v < 1.0f);
  }
  const auto params = cell.parameters("lstm");
  REQUIRE(params.size() == 3);
  const auto bias = values(params[2].second);
  for (std::size_t i = 0; i < 20; ++i) CHECK(bias[i] == ((i >= 5 && i < 10) ? 1.0f : 0.0f));
}

TEST_CASE("GRU update gate saturated shut keeps the state") {
  Rng rng(3);
  auto kernel = random_tensor({3, 6}, rng, -1, 1, false);
  auto rg = random_tensor({2, 4}, rng, -1, 1, false);
  auto rc = random_tensor({2, 2}, rng, -1, 1, false);
  auto bias = Tensor::from({6}, {-50, -50, 0, 0, 0, 0});
  GRUCell cell(kernel, rg, rc, bias);
  const auto h = Tensor::from({1, 2}, {0.3f, -0.7f});
  const auto out = cell(random_tensor({1, 3}, rng, -1, 1, false), {h, {}});
  CHECK(values(out.h) == values(h));
}

TEST_CASE("GRU with zero weights from zero state outputs zero") {
  GRUCell cell(Tensor::zeros({3, 6}), Tensor::zeros({2, 4}), Tensor::zeros({2, 2}), Tensor::zeros({6}));
  Rng rng(4);
  const auto out = cell(random_tensor({2, 3}, rng, -5, 5, false), cell.initial_state(2));
  for (Real v : out.h.data()) CHECK(v == 0.0f);
}

TEST_CASE("bidirectional wrapper symmetries") {
  Rng rng(5);
  auto cell = std::make_shared<GRUCell>(2, 3, rng);
  Bidirectional tied(cell, cell);
  CHECK(tied.output_size() == 6);
  const std::vector<std::size_t> full = {3};

  const auto palindrome = sequence({{1, 2}, {0.5f, -1}, {1, 2}});
  const auto p = tied.forward(palindrome, full);
  CHECK(p.shape() == Shape{1, 6});
  CHECK(slice_values(p, 0, 3) == slice_values(p, 3, 3));

  const auto x = sequence({{1, 0}, {0.2f, -0.4f}, {-1, 3}});
  const auto rx = sequence({{-1, 3}, {0.2f, -0.4f}, {1, 0}});
  const auto a = tied.forward(x, full);
  const auto b = tied.forward(rx, full);
  CHECK(slice_values(a, 0, 3) == slice_values(b, 3, 3));
  CHECK(slice_values(a, 3, 3) == slice_values(b, 0, 3));

  Bidirectional untied(cell, std::make_shared<GRUCell>(2, 3, rng));
  const auto u = untied.forward(x, full);
  const auto ur = untied.forward(rx, full);
  CHECK(values(u) != values(ur));
}

TEST_CASE("recurrent outputs ignore trailing padding") {
  Rng rng(6);
  LSTMCell lstm(2, 3, rng);
  GRUCell gru(2, 3, rng);
  Bidirectional bi(std::make_shared<LSTMCell>(2, 3, rng), std::make_shared<GRUCell>(2, 3, rng));
  const auto x = random_tensor({1, 4, 2}, rng, -1, 1, false);
  std::vector<Real> padded_values(x.data().begin(), x.data().end());
  padded_values.insert(padded_values.end(), 6, Real(7));
  const auto padded = Tensor::from({1, 7, 2}, padded_values);
  const std::vector<std::size_t> len = {4};
  for (const RecurrentCell* cell : {static_cast<const RecurrentCell*>(&lstm),
                                    static_cast<const RecurrentCell*>(&gru)}) {
    CHECK(values(run_recurrent(*cell, x, len, false)) == values(run_recurrent(*cell, padded, len, false)));
    CHECK(values(run_recurrent(*cell, x, len, true)) == values(run_recurrent(*cell, padded, len, true)));
  }
  CHECK(values(bi.forward(x, len)) == values(bi.forward(padded, len)));
}

TEST_CASE("spatial dropout") {
  Rng rng(7);
  const auto x = random_tensor({2, 5, 4}, rng, -1, 1, false);
  CHECK(values(spatial_dropout(x, 0.1, {})) == values(x));
  Rng mask(1);
  CHECK(values(spatial_dropout(x, 0.0, {true, &mask})) == values(x));

  const auto train = spatial_dropout(x, 0.5, {true, &mask});
  for (std::size_t w = 0; w < 10; ++w) {
    const auto row = slice_values(train, w * 4, 4);
    const auto in = slice_values(x, w * 4, 4);
    const bool dropped = row[0] == 0.0f;
    for (std::size_t d = 0; d < 4; ++d) CHECK(row[d] == (dropped ? 0.0f : 2.0f * in[d]));
  }
  CHECK_THROWS_AS(spatial_dropout(Tensor::zeros({2, 2}), 0.1, {}), ShapeError);
}

TEST_CASE("spatial dropout preserves the mean over 10,000 masks") {
  const auto x = Tensor::full({1, 8, 3}, 1.0f);
  Rng mask(11);
  double total = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto out = spatial_dropout(x, 0.1, {true, &mask});
    for (Real v : out.data()) total += v;
  }
  const double mean = total / (10000.0 * 24);
  CHECK(std::abs(mean - 1.0) <= 0.02);
}

TEST_CASE("dropout modes") {
  Rng rng(8);
  const auto x = random_tensor({3, 4}, rng, -1, 1, false);
  CHECK(values(dropout(x, 0.5, {})) == values(x));
  Rng mask(2);
  CHECK(values(dropout(x, 0.0, {true, &mask})) == values(x));
  CHECK_THROWS_AS(dropout(x, 1.0, {true, &mask}), Error);
  CHECK_THROWS_AS(dropout(x, 0.5, {true, nullptr}), Error);
}

TEST_CASE("pooling, flatten and dense") {
  const auto x = Tensor::from({1, 2, 2}, {1, 5, 3, 2});
  CHECK(values(max_pool_over_time(x)) == std::vector<Real>{3, 5});
  CHECK(flatten(Tensor::zeros({2, 3, 4})).shape() == Shape{2, 12});

  Dense identity(Tensor::from({2, 2}, {1, 0, 0, 1}), Tensor::zeros({2}), Activation::linear);
  const auto in = Tensor::from({2, 2}, {0.5f, -3, 7, 2});
  CHECK(values(identity.forward(in)) == values(in));
  CHECK_THROWS_AS(identity.forward(Tensor::zeros({2, 3})), ShapeError);

  Dense soft(Tensor::zeros({2, 4}), Tensor::zeros({4}), Activation::softmax);
  const auto probs = soft.forward(in);
  for (Real v : probs.data()) CHECK(v == 0.25f);
}

TEST_CASE("conv layer applies ReLU") {
  Conv1D conv(Tensor::from({1, 1, 1}, {-1}), Tensor::zeros({1}));
  const auto out = conv.forward(Tensor::from({1, 3, 1}, {1, -2, 3}));
  CHECK(values(out) == std::vector<Real>{0, 2, 0});
}

TEST_CASE("glorot init stays inside its limit") {
  Rng rng(9);
  const auto w = glorot_uniform({10, 6}, 10, 6, rng);
  const double limit = std::sqrt(6.0 / 16.0);
  for (Real v : w.data()) CHECK(std::abs(v) <= limit);
  CHECK(w.requires_grad());
}
