#include <cmath>
#include <vector>

#include "doctest.h"
#include "notedx/baselines.hpp"
#include "notedx/grad_check.hpp"
#include "oracles.hpp"

using namespace notedx;
using namespace notedx::baselines;

namespace {

Document d(std::vector<std::string> tokens) { return Document{"d", std::move(tokens), "x"}; }

double accuracy(const Tensor& probs, const std::vector<std::size_t>& labels) {
  const auto pred = argmax_rows(probs);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double norm(const LogRegModel& g) {
  double s = 0;
  for (double v : g.weights.values()) s += v * v;
  for (double v : g.bias.values()) s += v * v;
  return std::sqrt(s);
}

// Four Gaussian-ish blobs at the corners of a square, labelled by XOR.
void xor_data(Tensor& x, std::vector<std::size_t>& y, std::size_t per_corner, Rng& rng) {
  x = Tensor({4 * per_corner, 2});
  y.clear();
  std::size_t r = 0;
  for (int cx = 0; cx < 2; ++cx)
    for (int cy = 0; cy < 2; ++cy)
      for (std::size_t i = 0; i < per_corner; ++i, ++r) {
        x(r, 0) = (cx ? 1.0 : -1.0) + uniform(rng, -0.3, 0.3);
        x(r, 1) = (cy ? 1.0 : -1.0) + uniform(rng, -0.3, 0.3);
        y.push_back(static_cast<std::size_t>(cx ^ cy));
      }
}

}  // namespace

TEST_CASE("tf-idf by hand") {
  const std::vector<Document> corpus = {d({"a", "b", "a"}), d({"b", "c"}), d({"a", "c", "c", "b"})};
  const auto vocab = Vocabulary::build({{"a", "b", "a"}, {"b", "c"}, {"a", "c", "c", "b"}}, 1);
  REQUIRE(vocab.words() == std::vector<std::string>{"<pad>", "<unk>", "a", "b", "c"});
  const auto model = fit_tfidf(corpus, vocab);
  // df: a 2, b 3, c 2 over T = 3 documents.
  const double ia = std::log(4.0 / 3.0) + 1.0;
  CHECK(model.idf[0] == doctest::Approx(ia).epsilon(1e-15));
  CHECK(model.idf[1] == 1.0);  // in every document
  const auto m = transform(model, corpus).to_dense();
  const std::vector<double> want = {2 * ia, 1, 0,  //
                                    0,      1, ia,
                                    ia,     1, 2 * ia};
  REQUIRE(m.shape() == std::vector<std::size_t>{3, 3});
  for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(m[i] - want[i]) < 1e-15);
  CHECK(m(0, 2) == 0.0);

  const auto unseen = transform(model, {d({"zzz", "a"})}).to_dense();
  CHECK(unseen(0, 0) == doctest::Approx(ia));
  CHECK(unseen(0, 1) == 0.0);
}

TEST_CASE("PCA geometry") {
  // Points along the (1, 1) direction.
  Tensor line({6, 2});
  for (std::size_t i = 0; i < 6; ++i) {
    line(i, 0) = 0.7 * static_cast<double>(i) + 1.0;
    line(i, 1) = 0.7 * static_cast<double>(i) - 2.0;
  }
  const auto pca = fit_pca(line, 1);
  CHECK(std::abs(std::abs(pca.components(0, 0)) - 1 / std::sqrt(2.0)) < 1e-12);
  CHECK(std::abs(std::abs(pca.components(0, 1)) - 1 / std::sqrt(2.0)) < 1e-12);
  CHECK(pca.components(0, 0) * pca.components(0, 1) > 0);

  const auto mean = Tensor::from({1, 2}, {pca.mean[0], pca.mean[1]});
  CHECK(std::abs(transform(pca, mean)[0]) < 1e-15);
}

TEST_CASE("PCA reconstructs exact low-rank data") {
  Rng rng(3);
  const std::size_t n = 40, v = 12, r = 3;
  Tensor a({n, r}), b({r, v});
  oracle::fill_uniform(a, rng);
  oracle::fill_uniform(b, rng);
  Tensor x({n, v});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < v; ++j)
      for (std::size_t k = 0; k < r; ++k) x(i, j) += a(i, k) * b(k, j);
  for (std::size_t j = 0; j < v; ++j) x(0, j) += 5.0;  // offset so centering matters
  // Centering can add one direction, so rank r + 1 suffices.
  const auto pca = fit_pca(x, r + 1);
  const auto back = inverse_transform(pca, transform(pca, x));
  double err = 0;
  for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(back[i] - x[i]));
  CHECK(err < 1e-8);
  for (std::size_t k = 1; k < pca.output_dim(); ++k)
    CHECK(pca.explained_variance[k] <= pca.explained_variance[k - 1]);

  // The sparse path and the Gram-matrix path (V > T) agree with the dense one.
  SparseMatrix s;
  s.rows = n;
  s.cols = v;
  s.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < v; ++j) s.entries[i].push_back({static_cast<std::uint32_t>(j), x(i, j)});
  const auto sp = fit_pca(s, r + 1);
  const auto a1 = transform(pca, x), a2 = transform(sp, s);
  for (std::size_t i = 0; i < a1.size(); ++i) CHECK(std::abs(std::abs(a1[i]) - std::abs(a2[i])) < 1e-8);

  Tensor wide({5, 30});
  oracle::fill_uniform(wide, rng);
  const auto wp = fit_pca(wide, 4);
  const auto wb = inverse_transform(wp, transform(wp, wide));
  err = 0;
  for (std::size_t i = 0; i < wide.size(); ++i) err = std::max(err, std::abs(wb[i] - wide[i]));
  CHECK(err < 1e-8);
}

TEST_CASE("logistic regression") {
  Rng rng(4);
  Tensor x({60, 2});
  std::vector<std::size_t> y;
  for (std::size_t i = 0; i < 60; ++i) {
    const std::size_t c = i % 2;
    x(i, 0) = (c ? 2.0 : -2.0) + uniform(rng, -1, 1);
    x(i, 1) = uniform(rng, -3, 3);
    y.push_back(c);
  }
  const auto sep = train_logreg(x, y, 2, {1e-6, 5000, 1e-6});
  CHECK(accuracy(predict_proba(sep, x), y) == 1.0);

  // Heavy penalty: weights vanish and the bias carries the class prior.
  std::vector<std::size_t> skewed(60, 0);
  for (std::size_t i = 0; i < 15; ++i) skewed[i] = 1;
  const auto flat = train_logreg(x, skewed, 2, {1e6, 5000, 1e-9});
  for (double w : flat.weights.values()) CHECK(std::abs(w) < 1e-5);
  const auto p = predict_proba(flat, x);
  for (std::size_t i = 0; i < 60; ++i) CHECK(p(i, 1) == doctest::Approx(0.25).epsilon(1e-4));

  // Overlapping classes: a genuine interior optimum.
  for (std::size_t i = 0; i < 60; ++i) x(i, 0) = uniform(rng, -1, 1) + (y[i] ? 0.3 : -0.3);
  const auto fit = train_logreg(x, y, 2, {1e-2, 5000, 1e-8});
  CHECK(fit.converged);
  LogRegModel grad;
  logreg_objective(fit, x, y, 1e-2, &grad);
  CHECK(norm(grad) < 1e-5);
}

TEST_CASE("logistic regression objective gradient") {
  Rng rng(5);
  Tensor x({10, 3});
  oracle::fill_uniform(x, rng);
  std::vector<std::size_t> y = {0, 1, 2, 0, 1, 2, 0, 1, 2, 2};
  LogRegModel m;
  m.weights = Tensor({3, 3});
  m.bias = Tensor({3});
  oracle::fill_uniform(m.weights, rng);
  oracle::fill_uniform(m.bias, rng);
  LogRegModel g;
  logreg_objective(m, x, y, 0.1, &g);
  auto loss = [&] { return logreg_objective(m, x, y, 0.1); };
  const nn::GradBlock blocks[] = {{m.weights.values(), g.weights.values()}, {m.bias.values(), g.bias.values()}};
  CHECK(nn::grad_check(loss, blocks).max_relative_error < 1e-6);
}

TEST_CASE("MLP learns XOR where logistic regression cannot") {
  Rng rng(6);
  Tensor x;
  std::vector<std::size_t> y;
  xor_data(x, y, 25, rng);
  MlpOptions opt;
  opt.hidden = {16};
  opt.learning_rate = 0.01;
  opt.batch_size = 20;
  opt.max_epochs = 500;
  opt.patience = 500;
  opt.holdout_fraction = 0;
  const auto mlp = train_mlp(x, y, 2, opt);
  CHECK(accuracy(predict_proba(mlp, x), y) == 1.0);

  const auto lr = train_logreg(x, y, 2);
  const double lr_acc = accuracy(predict_proba(lr, x), y);
  CHECK(lr_acc <= 0.75);
  CHECK(lr_acc >= 0.25);
}

TEST_CASE("MLP zero epochs and gradients") {
  Rng rng(7);
  Tensor x({8, 3});
  oracle::fill_uniform(x, rng);
  const std::vector<std::size_t> y = {0, 1, 2, 1, 0, 2, 2, 1};
  MlpOptions opt;
  opt.hidden = {5, 4};
  opt.max_epochs = 0;
  const auto init = init_mlp(3, 3, opt);
  const auto trained = train_mlp(x, y, 3, opt);
  CHECK(predict_proba(trained, x) == predict_proba(init, x));

  auto m = init;
  std::vector<Tensor> grads;
  mlp_loss(m, x, y, &grads);
  const auto params = m.parameters();
  REQUIRE(grads.size() == params.size());
  std::vector<nn::GradBlock> blocks;
  for (std::size_t i = 0; i < params.size(); ++i) blocks.push_back({params[i]->values(), grads[i].values()});
  auto loss = [&] { return mlp_loss(m, x, y); };
  CHECK(nn::grad_check(loss, blocks).max_relative_error < 1e-5);
}
