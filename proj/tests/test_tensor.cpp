#include <cmath>

#include "alix/errors.hpp"
#include "alix/grad_check.hpp"
#include "alix/ops.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace alix;
using alix::testing::max_abs_diff;
using alix::testing::random_tensor;

TEST_CASE("conv2d: identity 1x1 kernel returns the input") {
  Rng rng(1);
  Tensor x = random_tensor({1, 1, 3, 3}, rng);
  Tensor k({1, 1, 1, 1}, 1.0);
  Tensor y = conv2d(x, k, 1, 0);
  CHECK(y.shape() == x.shape());
  CHECK(max_abs_diff(y.values(), x.values()) == 0.0);
}

TEST_CASE("conv2d: all-ones 2x2 kernel sums the window") {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor k({1, 1, 2, 2}, 1.0);
  Tensor y = conv2d(x, k, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == 10.0);
}

TEST_CASE("conv2d: im2col path matches nested-loop reference") {
  Rng rng(7);
  Tensor x = random_tensor({2, 3, 8, 8}, rng);
  Tensor k = random_tensor({4, 3, 3, 3}, rng);
  for (std::size_t pad : {0u, 1u, 2u}) {
    Tensor y = conv2d(x, k, 2, pad);
    auto ref = conv2d_reference(x, k, 2, pad);
    const std::size_t ho = (8 + 2 * pad - 3) / 2 + 1;
    CHECK(y.shape() == Shape{2, 4, ho, ho});
    CHECK(max_abs_diff(y.values(), ref) <= 1e-12);
  }
}

TEST_CASE("conv2d: errors") {
  Tensor x({1, 2, 4, 4}, 0.0);
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 3, 3, 3}, 0.0), 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 2, 5, 5}, 0.0), 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 2, 3, 3}, 0.0), 0, 0), std::invalid_argument);
  x.values_mut()[3] = std::nan("");
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 2, 3, 3}, 0.0), 1, 0), NumericError);
}

TEST_CASE("linear: identity, hand arithmetic, naive matmul oracle") {
  Rng rng(3);
  Tensor x = random_tensor({3, 4}, rng);
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[i * 5] = 1.0;
  Tensor y = linear(x, Tensor({4, 4}, eye), Tensor({4}, 0.0));
  CHECK(max_abs_diff(y.values(), x.values()) == 0.0);

  Tensor z = linear(Tensor({1, 2}, {1, 2}), Tensor({1, 2}, {3, 4}), Tensor({1}, {5}));
  CHECK(z.item() == 16.0);

  Tensor a = random_tensor({4, 6}, rng);
  Tensor w = random_tensor({3, 6}, rng);
  Tensor b = random_tensor({3}, rng);
  Tensor out = linear(a, w, b);
  std::vector<double> ref(12);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t m = 0; m < 3; ++m) {
      double s = b.at({m});
      for (std::size_t n = 0; n < 6; ++n) s += a.at({i, n}) * w.at({m, n});
      ref[i * 3 + m] = s;
    }
  CHECK(max_abs_diff(out.values(), ref) <= 1e-12);
  CHECK_THROWS_AS(linear(a, random_tensor({3, 5}, rng), b), std::invalid_argument);
}

TEST_CASE("elementwise ops") {
  Tensor x({3}, {-1, 0, 2});
  Tensor r = relu(x);
  CHECK(r.at({0}) == 0.0);
  CHECK(r.at({1}) == 0.0);
  CHECK(r.at({2}) == 2.0);
  CHECK(log1p(Tensor::scalar(0.0)).item() == 0.0);

  Tensor s = Tensor::scalar(3.0, true);
  backward(square(s));
  CHECK(s.grad()[0] == doctest::Approx(6.0));

  CHECK_THROWS_AS(add(Tensor({2}, 0.0), Tensor({3}, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(mul(Tensor({2}, 0.0), Tensor({2, 1}, 0.0)), std::invalid_argument);
}

TEST_CASE("reductions") {
  CHECK(mean(Tensor({3}, {1, 2, 3})).item() == 2.0);
  CHECK(sum(Tensor({5}, 0.0)).item() == 0.0);

  Tensor x({4}, {1, 2, 3, 4}, true);
  backward(mean(x));
  for (double g : x.grad()) CHECK(g == 0.25);

  Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor rows = sum(m, {1});
  CHECK(rows.shape() == Shape{2});
  CHECK(rows.at({0}) == 6.0);
  CHECK(rows.at({1}) == 15.0);
  Tensor cols = mean(m, {0});
  CHECK(cols.shape() == Shape{3});
  CHECK(cols.at({2}) == 4.5);
  CHECK_THROWS_AS(sum(m, {2}), std::invalid_argument);
}

TEST_CASE("backward: basics") {
  Tensor x = Tensor::scalar(0.7, true);
  backward(scalar_mul(x, 1.0));
  CHECK(x.grad()[0] == 1.0);

  CHECK_THROWS_AS(backward(Tensor({2}, 1.0, true)), std::invalid_argument);
  CHECK_THROWS_AS(backward(Tensor::scalar(1.0)), std::invalid_argument);

  // Two branches summed: contributions add.
  Tensor y({3}, {1, 2, 3}, true);
  backward(add(sum(scalar_mul(y, 2.0)), sum(square(y))));
  CHECK(y.grad()[0] == doctest::Approx(2.0 + 2.0));
  CHECK(y.grad()[2] == doctest::Approx(2.0 + 6.0));
}

TEST_CASE("backward: accumulation across calls is additive") {
  Rng rng(11);
  Tensor w = random_tensor({3, 4}, rng, -1, 1, true);
  Tensor b({3}, 0.0, true);
  Tensor x1 = random_tensor({2, 4}, rng), x2 = random_tensor({2, 4}, rng);
  auto loss = [&](const Tensor& x) { return mean(square(linear(x, w, b))); };

  backward(loss(x1));
  std::vector<double> g1(w.grad().begin(), w.grad().end());
  w.zero_grad();
  backward(loss(x2));
  std::vector<double> g2(w.grad().begin(), w.grad().end());

  w.zero_grad();
  backward(loss(x2));
  backward(loss(x1));
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(w.grad()[i] - (g1[i] + g2[i])) <= 1e-10);
}

TEST_CASE("backward: tape is consumed") {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = square(x);
  Tape tape = Tape::record(y);
  CHECK(tape.size() == 2);
  CHECK(tape.order().back() == y.id());
  backward(y);
  CHECK(Tape::record(y).size() == 1);
}

TEST_CASE("backward: mse(conv2d) matches finite differences") {
  Rng rng(5);
  Tensor x = random_tensor({2, 2, 6, 6}, rng);
  Tensor k = random_tensor({3, 2, 3, 3}, rng);
  Tensor target = random_tensor({2, 3, 4, 4}, rng);
  double err = grad_check([&] { return mse_loss(conv2d(x, k, 1, 0), target); }, {x, k}, 1e-5);
  CHECK(err <= 1e-4);
}

TEST_CASE("grad_check: linear layer, conv stack, constant function") {
  Rng rng(9);
  Tensor x = random_tensor({4, 5}, rng);
  Tensor w = random_tensor({3, 5}, rng);
  Tensor b = random_tensor({3}, rng);
  Tensor t = random_tensor({4, 3}, rng);
  CHECK(grad_check([&] { return mse_loss(linear(x, w, b), t); }, {x, w, b}) <= 1e-6);

  Tensor img = random_tensor({1, 2, 9, 9}, rng);
  Tensor k1 = random_tensor({3, 2, 3, 3}, rng);
  Tensor k2 = random_tensor({2, 3, 3, 3}, rng);
  Tensor b1 = random_tensor({3}, rng);
  auto stack = [&] { return mean(square(conv2d(relu(conv2d(img, k1, b1, 2, 1)), k2, 1, 0))); };
  CHECK(grad_check(stack, {img, k1, k2, b1}) <= 1e-4);

  Tensor c = random_tensor({3}, rng);
  CHECK(grad_check([] { return Tensor::scalar(4.2); }, {c}) == 0.0);
}

TEST_CASE("property: every differentiable op matches finite differences on random inputs") {
  Rng rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({3, 4}, rng);
    Tensor p = random_tensor({3, 4}, rng, 0.0, 1.0);  // log1p domain
    Tensor g = random_tensor({4}, rng), s = random_tensor({4}, rng);
    Tensor w = random_tensor({2, 4}, rng), bias = random_tensor({2}, rng);
    Tensor weights = random_tensor({3, 4}, rng);  // makes reductions non-uniform
    auto probe = [&](Tensor t) { return sum(mul(t, weights)); };

    CHECK(grad_check([&] { return probe(add(a, b)); }, {a, b}) <= 1e-4);
    CHECK(grad_check([&] { return probe(sub(a, b)); }, {a, b}) <= 1e-4);
    CHECK(grad_check([&] { return probe(mul(a, b)); }, {a, b}) <= 1e-4);
    CHECK(grad_check([&] { return probe(scalar_mul(a, -1.7)); }, {a}) <= 1e-4);
    CHECK(grad_check([&] { return probe(add_scalar(a, 0.3)); }, {a}) <= 1e-4);
    CHECK(grad_check([&] { return probe(relu(a)); }, {a}) <= 1e-4);
    CHECK(grad_check([&] { return probe(tanh(a)); }, {a}) <= 1e-4);
    CHECK(grad_check([&] { return probe(square(a)); }, {a}) <= 1e-4);
    CHECK(grad_check([&] { return probe(log1p(p)); }, {p}) <= 1e-4);
    CHECK(grad_check([&] { return sum(mul(sum(a, {0}), g)); }, {a}) <= 1e-4);
    CHECK(grad_check([&] { return mean(square(mean(a, {1}))); }, {a}) <= 1e-4);
    CHECK(grad_check([&] { return probe(layer_norm(a, g, s)); }, {a, g, s}) <= 1e-4);
    CHECK(grad_check([&] { return mean(square(concat_cols({a, b}))); }, {a, b}) <= 1e-4);
    CHECK(grad_check([&] { return mean(square(linear(a, w, bias))); }, {a, w, bias}) <= 1e-6);
    CHECK(grad_check([&] { return mean(square(reshape(a, {12}))); }, {a}) <= 1e-4);
  }
}

TEST_CASE("determinism: identical inputs give bit-identical outputs and gradients") {
  auto run = [] {
    Rng rng(42);
    Tensor x = random_tensor({2, 3, 7, 7}, rng);
    Tensor k = random_tensor({4, 3, 3, 3}, rng, -1, 1, true);
    Tensor loss = mean(square(relu(conv2d(x, k, 2, 1))));
    backward(loss);
    std::vector<double> out{loss.item()};
    out.insert(out.end(), k.grad().begin(), k.grad().end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("no-grad guard suppresses recording") {
  Tensor x = Tensor::scalar(1.0, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = square(x);
  }
  CHECK_FALSE(y.requires_grad());
  CHECK(grad_enabled());
}
