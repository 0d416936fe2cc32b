#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "notedx/adam.hpp"
#include "notedx/grad_check.hpp"
#include "notedx/layers.hpp"
#include "oracles.hpp"

using namespace notedx;
using namespace notedx::nn;

namespace {

double weighted_sum(const Tensor& t, const Tensor& r) {
  double s = 0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * r[i];
  return s;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  oracle::fill_uniform(t, rng, lo, hi);
  return t;
}

}  // namespace

TEST_CASE("embedding lookup") {
  Rng rng(1);
  const auto table = random_tensor({4, 3}, rng);
  const std::vector<std::int32_t> pads = {0, 0};
  const auto z = embedding_lookup(pads, table);
  CHECK(z == Tensor({2, 3}));

  const auto eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const std::vector<std::int32_t> ids = {2, 1};
  CHECK(embedding_lookup(ids, eye) == Tensor::from({2, 3}, {0, 0, 1, 0, 1, 0}));

  const std::vector<std::int32_t> bad = {4};
  CHECK(oracle::code_of([&] { embedding_lookup(bad, table); }) == ErrorCode::OutOfRange);
}

TEST_CASE("embedding gradient of the sum counts row uses") {
  Rng rng(2);
  auto table = random_tensor({5, 2}, rng);
  const std::vector<std::int32_t> ids = {3, 1, 3, 0, 3};
  Tensor grad(table.shape());
  embedding_lookup_backward(ids, Tensor({ids.size(), 2}, 1.0), grad);
  const std::vector<double> uses = {0, 1, 0, 3, 0};  // padding never gets gradient
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t e = 0; e < 2; ++e) CHECK(grad(r, e) == uses[r]);

  auto loss = [&] {
    const auto out = embedding_lookup(ids, table);
    return std::accumulate(out.values().begin(), out.values().end(), 0.0);
  };
  GradBlock block{table.values(), grad.values()};
  CHECK(grad_check(loss, std::span(&block, 1)).max_relative_error < 1e-6);
}

TEST_CASE("conv1d_same small cases") {
  FilterBank bank(2, 3, 4);
  Rng rng(3);
  oracle::fill_uniform(bank.weights, rng);
  bank.biases = Tensor::from({2}, {0.5, -0.25});
  const auto out = conv1d_same(Tensor({5, 4}), bank, Activation::Identity);
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(out.preactivation(t, 0) == 0.5);
    CHECK(out.preactivation(t, 1) == -0.25);
  }

  FilterBank unit(1, 1, 1);
  unit.weights[0] = 2;
  const auto scaled = conv1d_same(Tensor::from({3, 1}, {1, 2, 3}), unit);
  CHECK(scaled.preactivation == Tensor::from({3, 1}, {2, 4, 6}));
}

TEST_CASE("conv1d_same matches the naive oracle") {
  Rng rng(4);
  for (int n = 0; n < 50; ++n) {
    const std::size_t L = 1 + uniform_index(rng, 9), E = 1 + uniform_index(rng, 5);
    const std::size_t H = 1 + uniform_index(rng, 6), F = 1 + uniform_index(rng, 4);
    const auto x = random_tensor({L, E}, rng);
    FilterBank bank(F, H, E);
    oracle::fill_uniform(bank.weights, rng);
    oracle::fill_uniform(bank.biases, rng);
    std::vector<std::vector<std::vector<double>>> w(F, std::vector<std::vector<double>>(H, std::vector<double>(E)));
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t e = 0; e < E; ++e) w[f][h][e] = bank.weights(f, h, e);
    const std::vector<double> b(bank.biases.values().begin(), bank.biases.values().end());
    const auto want = oracle::conv_same(oracle::rows(x), w, b);
    const auto got = conv1d_same(x, bank);
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        CHECK(std::abs(got.preactivation(t, f) - want[t][f]) <= 1e-12);
        CHECK(got.output(t, f) == std::max(0.0, got.preactivation(t, f)));
      }
    }
  }
}

TEST_CASE("conv1d_same gradients") {
  Rng rng(5);
  for (auto act : {Activation::Identity, Activation::Relu}) {
    auto x = random_tensor({7, 4}, rng);
    FilterBank bank(3, 3, 4);
    oracle::fill_uniform(bank.weights, rng);
    oracle::fill_uniform(bank.biases, rng);
    // Keep every preactivation well away from the ReLU kink.
    auto fwd = conv1d_same(x, bank, act);
    for (auto& p : fwd.preactivation.values()) REQUIRE(std::abs(p) > 1e-4);
    const auto r = random_tensor({7, 3}, rng);
    FilterBankGrad g(bank);
    const auto gx = conv1d_same_backward(x, bank, fwd, r, g, act);
    auto loss = [&] { return weighted_sum(conv1d_same(x, bank, act).output, r); };
    const GradBlock blocks[] = {{x.values(), gx.values()},
                                {bank.weights.values(), g.weights.values()},
                                {bank.biases.values(), g.biases.values()}};
    CHECK(grad_check(loss, blocks).max_relative_error < 1e-5);
  }
}

TEST_CASE("max pooling") {
  const auto pooled = max_pool_time(Tensor::from({3, 2}, {4, 1, 4, 5, 4, 3}));
  CHECK(pooled.values == Tensor::from({2}, {4, 5}));
  CHECK(pooled.argmax == std::vector<std::size_t>{0, 1});

  const auto back = max_pool_time_backward(pooled, 3, Tensor::from({2}, {1, 1}));
  CHECK(back == Tensor::from({3, 2}, {1, 0, 0, 1, 0, 0}));

  Rng rng(6);
  auto x = random_tensor({6, 3}, rng);
  const auto r = random_tensor({3}, rng);
  const auto gx = max_pool_time_backward(max_pool_time(x), 6, r);
  auto loss = [&] { return weighted_sum(max_pool_time(x).values, r); };
  GradBlock block{x.values(), gx.values()};
  CHECK(grad_check(loss, std::span(&block, 1)).max_relative_error < 1e-6);
}

TEST_CASE("dense layer") {
  const auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const auto x = Tensor::from({2}, {3, -4});
  CHECK(dense(x, eye, Tensor({2})) == x);
  const auto b = Tensor::from({2}, {0.5, 7});
  CHECK(dense(Tensor({2}), eye, b) == b);

  Rng rng(7);
  auto w = random_tensor({4, 3}, rng);
  auto bias = random_tensor({4}, rng);
  auto in = random_tensor({3}, rng);
  const auto y = dense(in, w, bias);
  for (std::size_t k = 0; k < 4; ++k) {
    const double want = bias[k] + w(k, 0) * in[0] + w(k, 1) * in[1] + w(k, 2) * in[2];
    CHECK(std::abs(y[k] - want) < 1e-15);
  }

  const auto r = random_tensor({4}, rng);
  Tensor gw(w.shape()), gb(bias.shape());
  const auto gx = dense_backward(in, w, r, gw, gb);
  auto loss = [&] { return weighted_sum(dense(in, w, bias), r); };
  const GradBlock blocks[] = {{in.values(), gx.values()}, {w.values(), gw.values()}, {bias.values(), gb.values()}};
  CHECK(grad_check(loss, blocks).max_relative_error < 1e-6);
}

TEST_CASE("dropout") {
  Rng rng(8);
  const auto x = random_tensor({100}, rng);
  CHECK(dropout(x, 0.5, Mode::Infer, rng).output == x);
  CHECK(dropout(x, 1.0, Mode::Train, rng).output == x);

  const Tensor ones({100000}, 1.0);
  const auto d = dropout(ones, 0.5, Mode::Train, rng);
  std::size_t kept = 0;
  for (double v : d.output.values()) {
    CHECK((v == 0.0 || v == 2.0));
    kept += v != 0.0;
  }
  const double frac = static_cast<double>(kept) / 100000.0;
  CHECK(frac >= 0.49);
  CHECK(frac <= 0.51);
  CHECK(dropout_backward(d, ones) == d.mask);
}

TEST_CASE("softmax") {
  const auto u = softmax(Tensor({4}));
  for (double p : u.values()) CHECK(p == doctest::Approx(0.25));

  const auto big = softmax(Tensor::from({2}, {1000, 0}));
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] < 1e-300);

  const auto p = softmax(Tensor::from({3}, {std::log(1.0), std::log(2.0), std::log(3.0)}));
  CHECK(std::abs(p[0] - 1.0 / 6) < 1e-15);
  CHECK(std::abs(p[1] - 2.0 / 6) < 1e-15);
  CHECK(std::abs(p[2] - 3.0 / 6) < 1e-15);
}

TEST_CASE("cross-entropy") {
  CHECK(cross_entropy(one_hot(1, 3), Tensor::from({3}, {0, 1, 0})) == 0.0);
  CHECK(cross_entropy(one_hot(4, 10), Tensor({10}, 0.1)) == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  Rng rng(9);
  for (int n = 0; n < 20; ++n) {
    auto logits = random_tensor({6}, rng, -3, 3);
    const auto y = one_hot(uniform_index(rng, 6), 6);
    const auto g = softmax_cross_entropy_backward(y, softmax(logits));
    for (std::size_t i = 0; i < 6; ++i) CHECK(g[i] == softmax(logits)[i] - y[i]);
    auto loss = [&] { return cross_entropy(y, softmax(logits)); };
    GradBlock block{logits.values(), g.values()};
    CHECK(grad_check(loss, std::span(&block, 1)).max_relative_error < 1e-6);
  }
}

TEST_CASE("adam") {
  auto p = Tensor::from({3}, {1, -2, 3});
  const auto start = p;
  std::vector<Tensor*> params = {&p};
  AdamState adam(params, {});
  const Tensor zero({3});
  std::vector<const Tensor*> grads = {&zero};
  adam.step(params, grads);
  CHECK(p == start);

  AdamState fresh(params, {});
  const auto g = Tensor::from({3}, {0.3, -5, 1e-3});
  grads = {&g};
  fresh.step(params, grads);
  // m_hat = g and v_hat = g^2 after one step, so the move is lr * g / (|g| + eps).
  for (std::size_t i = 0; i < 3; ++i) {
    const double want = start[i] - 1e-4 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(std::abs(p[i] - want) < 1e-15);
    CHECK(std::abs(std::abs(p[i] - start[i]) - 1e-4) < 1e-8);
  }

  // f(x) = (x - 3)^2 from x = 0.
  auto x = Tensor::from({1}, {0});
  std::vector<Tensor*> xs = {&x};
  AdamState opt(xs, {0.05});
  double prev = 9;
  for (int s = 0; s < 50; ++s) {
    const auto gx = Tensor::from({1}, {2 * (x[0] - 3)});
    std::vector<const Tensor*> gs = {&gx};
    opt.step(xs, gs);
    const double f = (x[0] - 3) * (x[0] - 3);
    CHECK(f < prev);
    prev = f;
  }
}

TEST_CASE("grad_check reports a wrong gradient") {
  std::vector<double> x = {1.0, 2.0};
  const std::vector<double> wrong = {2.0, 5.0};  // true gradient of x0^2 + x1^2 is (2, 4)
  auto loss = [&] { return x[0] * x[0] + x[1] * x[1]; };
  GradBlock block{x, wrong};
  const auto r = grad_check(loss, std::span(&block, 1));
  CHECK(r.max_relative_error > 0.1);
  CHECK(r.worst_index == 1);
  CHECK(x == std::vector<double>{1.0, 2.0});
}
