#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "notedx/cnn.hpp"
#include "notedx/experiment.hpp"
#include "notedx/grad_check.hpp"
#include "notedx/synthetic.hpp"
#include "oracles.hpp"

using namespace notedx;
using oracle::code_of;

namespace {

std::vector<Document> keyword_corpus(std::size_t classes, std::size_t docs, std::uint64_t seed) {
  synth::SyntheticSpec spec;
  const auto names = synth::reference_classes();
  spec.classes.assign(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(classes));
  spec.weights.clear();
  spec.documents = docs;
  spec.noise_vocabulary = 300;
  spec.seed = seed;
  std::vector<Document> out;
  for (const auto& raw : synth::generate(spec)) out.push_back(preprocess_note(raw, {}));
  return out;
}

cnn::CnnConfig tiny_config() {
  cnn::CnnConfig c;
  c.embed_dim = 8;
  c.filters = {{2, 3}, {3, 4}};
  c.keep_prob = 0.7;
  c.max_length = 9;
  c.min_count = 1;
  return c;
}

Vocabulary tiny_vocab() {
  return Vocabulary::build({{"a", "b", "c", "d", "e", "f", "g"}}, 1);
}

}  // namespace

TEST_CASE("architecture shapes") {
  cnn::CnnConfig c;
  CHECK(c.total_filters() == 192);
  std::vector<std::string> classes;
  for (int k = 0; k < 10; ++k) classes.push_back("c" + std::to_string(k));
  const auto m = cnn::build_model(c, tiny_vocab(), classes);
  CHECK(m.dense_weights.shape() == std::vector<std::size_t>{10, 192});
  CHECK(m.embedding.shape() == std::vector<std::size_t>{9, 128});
  CHECK(m.banks[1].weights.shape() == std::vector<std::size_t>{64, 4, 128});
  for (std::size_t e = 0; e < 128; ++e) CHECK(m.embedding(0, e) == 0.0);

  c.keep_prob = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::Config);
}

TEST_CASE("pretrained rows are copied exactly") {
  SkipgramConfig sc;
  sc.dim = 8;
  sc.min_count = 1;
  sc.subsample = 0;
  sc.buckets = 1u << 10;
  std::vector<std::vector<std::string>> corpus(30, {"a", "b", "c", "d", "e"});
  const auto store = train_skipgram(corpus, sc);
  const auto vocab = tiny_vocab();
  const auto m = cnn::build_model(tiny_config(), vocab, {"x", "y"}, &store);
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    const auto row = m.embedding.row(w);
    CHECK(std::vector<double>(row.begin(), row.end()) == store.embed(vocab.word(static_cast<std::int32_t>(w))));
  }

  auto wide = tiny_config();
  wide.embed_dim = 16;
  CHECK(code_of([&] { cnn::build_model(wide, vocab, {"x", "y"}, &store); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("rebuild without pretraining is bit-identical") {
  const auto a = cnn::build_model(tiny_config(), tiny_vocab(), {"x", "y"});
  const auto b = cnn::build_model(tiny_config(), tiny_vocab(), {"x", "y"});
  CHECK(a.embedding == b.embedding);
  CHECK(a.banks[0].weights == b.banks[0].weights);
  CHECK(a.dense_weights == b.dense_weights);
  auto other = tiny_config();
  other.seed = 2;
  CHECK_FALSE(cnn::build_model(other, tiny_vocab(), {"x", "y"}).dense_weights == a.dense_weights);
}

TEST_CASE("forward invariants") {
  auto m = cnn::build_model(tiny_config(), tiny_vocab(), {"x", "y", "z"});
  Rng rng(1);
  for (auto& b : m.banks) oracle::fill_uniform(b.biases, rng);
  oracle::fill_uniform(m.dense_bias, rng);

  // All padding: features are the activated conv biases.
  const auto p = cnn::predict_proba(m, {});
  Tensor features({m.config.total_filters()});
  std::size_t i = 0;
  for (const auto& b : m.banks)
    for (std::size_t f = 0; f < b.filters(); ++f) features[i++] = std::max(0.0, b.biases[f]);
  const auto want = nn::softmax(nn::dense(features, m.dense_weights, m.dense_bias));
  for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(p[k] - want[k]) < 1e-15);
  CHECK(cnn::predict_proba(m, {}) == p);

  for (int n = 0; n < 20; ++n) {
    std::vector<std::string> tokens;
    for (int t = 0; t < 1 + n % 12; ++t) tokens.push_back(std::string(1, static_cast<char>('a' + uniform_index(rng, 8))));
    const auto probs = cnn::predict_proba(m, tokens);
    CHECK(std::abs(std::accumulate(probs.values().begin(), probs.values().end(), 0.0) - 1.0) < 1e-12);
  }
}

TEST_CASE("a duplicated strongest window reproduces the pooled maximum") {
  auto cfg = tiny_config();
  cfg.filters = {{3, 4}};
  cfg.max_length = 20;
  const auto m = cnn::build_model(cfg, tiny_vocab(), {"x", "y"});
  const std::vector<std::string> doc = {"a", "c", "e", "b", "g", "d", "f"};
  Rng unused(0);
  const auto base = cnn::forward(m, cnn::encode_document(m, doc), nn::Mode::Infer, unused);
  std::size_t tested = 0;
  for (std::size_t f = 0; f < 4; ++f) {
    // Trigram centred on the argmax row; only interior rows have a full window.
    const std::size_t row = base.pooled[0].argmax[f];
    if (row == 0 || row + 1 >= doc.size()) continue;
    auto longer = doc;
    longer.insert(longer.end(), {doc[row - 1], doc[row], doc[row + 1]});
    const auto again = cnn::forward(m, cnn::encode_document(m, longer), nn::Mode::Infer, unused);
    const std::size_t copy_row = doc.size() + 1;
    // The copy scores exactly what the original did...
    CHECK(again.conv[0].output(copy_row, f) == base.pooled[0].values[f]);
    // ...so the pool is unchanged unless a new boundary window beats it.
    double top = again.conv[0].output(0, f);
    for (std::size_t t = 0; t < longer.size(); ++t) top = std::max(top, again.conv[0].output(t, f));
    CHECK(again.pooled[0].values[f] == top);
    CHECK(again.pooled[0].values[f] >= base.pooled[0].values[f]);
    ++tested;
  }
  CHECK(tested > 0);
}

TEST_CASE("end-to-end gradient check") {
  auto m = cnn::build_model(tiny_config(), tiny_vocab(), {"x", "y", "z"});
  Rng rng(2);
  for (auto* t : m.parameters()) oracle::fill_uniform(*t, rng, -0.5, 0.5);
  for (std::size_t e = 0; e < m.config.embed_dim; ++e) m.embedding(0, e) = 0;
  const auto ids = cnn::encode_document(m, {"a", "d", "b", "g", "c", "a"});

  auto run = [&] {
    Rng mask(77);  // same dropout mask on every evaluation
    return cnn::forward(m, ids, nn::Mode::Train, mask);
  };
  const auto pass = run();
  for (const auto& c : pass.conv)
    for (double v : c.preactivation.values()) REQUIRE(std::abs(v) > 1e-4);
  cnn::CnnGradients g(m);
  cnn::backward(m, pass, 1, g);
  auto loss = [&] { return nn::cross_entropy(nn::one_hot(1, 3), run().probs); };

  std::vector<nn::GradBlock> blocks;
  // Skip the padding row of the embedding: it is not a parameter.
  const std::size_t E = m.config.embed_dim;
  blocks.push_back({m.embedding.values().subspan(E), g.embedding.values().subspan(E)});
  for (std::size_t b = 0; b < m.banks.size(); ++b) {
    blocks.push_back({m.banks[b].weights.values(), g.banks[b].weights.values()});
    blocks.push_back({m.banks[b].biases.values(), g.banks[b].biases.values()});
  }
  blocks.push_back({m.dense_weights.values(), g.dense_weights.values()});
  blocks.push_back({m.dense_bias.values(), g.dense_bias.values()});
  const auto r = nn::grad_check(loss, blocks);
  CHECK(r.max_relative_error < 1e-4);
  CHECK(r.checked > 200);
}

TEST_CASE("training on a small keyword corpus") {
  const auto corpus = keyword_corpus(3, 300, 5);
  const auto split = split_dataset(corpus, 1);
  cnn::CnnConfig cfg;
  cfg.embed_dim = 32;
  cfg.filters = {{3, 16}, {4, 16}, {5, 16}};
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 16;
  cfg.max_epochs = 20;
  cfg.patience = 20;
  cfg.min_count = 1;
  auto m = cnn::build_model(cfg, Vocabulary::build(experiment::token_lists(split.train), 1),
                            experiment::label_order(corpus));
  cnn::train(m, split);
  REQUIRE(!m.history.empty());
  double best = 0;
  for (const auto& h : m.history) best = std::max(best, h.validation_wf1);
  CHECK(best >= 0.95);
  CHECK(m.history.front().train_loss < m.initial_train_loss);
}

TEST_CASE("zero learning rate leaves parameters alone") {
  const auto corpus = keyword_corpus(2, 60, 6);
  const auto split = split_dataset(corpus, 2);
  auto cfg = tiny_config();
  cfg.learning_rate = 0;
  cfg.max_epochs = 3;
  cfg.patience = 10;
  auto m = cnn::build_model(cfg, Vocabulary::build(experiment::token_lists(split.train), 1),
                            experiment::label_order(corpus));
  const auto before = m;
  cnn::train(m, split);
  CHECK(m.embedding == before.embedding);
  CHECK(m.banks[0].weights == before.banks[0].weights);
  CHECK(m.dense_weights == before.dense_weights);
  REQUIRE(m.history.size() == 3);
  for (const auto& h : m.history) CHECK(h.validation_wf1 == m.history.front().validation_wf1);
}

TEST_CASE("checkpoint round trip and errors") {
  oracle::TempDir dir("ckpt");
  auto m = cnn::build_model(tiny_config(), tiny_vocab(), {"x", "y"});
  m.history.push_back({1, 0.5, 0.75, 0.8});
  cnn::save_checkpoint(m, dir / "m.ckpt");
  const auto back = cnn::load_checkpoint(dir / "m.ckpt");
  CHECK(back.vocab == m.vocab);
  CHECK(back.classes == m.classes);
  CHECK(back.history.size() == 1);
  for (const auto& doc : {std::vector<std::string>{"a", "b"}, std::vector<std::string>{"g", "zz", "c", "d"}})
    CHECK(cnn::predict_proba(back, doc) == cnn::predict_proba(m, doc));

  std::ifstream in(dir / "m.ckpt", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    out << content;
  };
  std::string bad = bytes;
  bad[1] ^= 0x5A;
  write("magic.ckpt", bad);
  CHECK(code_of([&] { cnn::load_checkpoint(dir / "magic.ckpt"); }) == ErrorCode::CorruptFile);

  std::string newer = bytes;
  newer[4] = static_cast<char>(cnn::kCheckpointVersion + 1);
  write("version.ckpt", newer);
  CHECK(code_of([&] { cnn::load_checkpoint(dir / "version.ckpt"); }) == ErrorCode::VersionMismatch);

  write("short.ckpt", bytes.substr(0, bytes.size() - 10));
  CHECK(code_of([&] { cnn::load_checkpoint(dir / "short.ckpt"); }) == ErrorCode::TruncatedFile);
  CHECK(code_of([&] { cnn::load_checkpoint(dir / "missing.ckpt"); }) == ErrorCode::Io);
}

TEST_CASE("multi-seed runs") {
  const auto corpus = keyword_corpus(3, 120, 7);
  auto cfg = tiny_config();
  cfg.max_length = 0;
  cfg.max_epochs = 2;
  cfg.learning_rate = 1e-3;

  experiment::ExperimentOptions one;
  one.seeds = 1;
  one.first_seed = 4;
  const auto runs = experiment::run_cnn(corpus, cfg, one);
  REQUIRE(runs.size() == 1);

  // The same composition by hand.
  const auto split = split_dataset(corpus, 4);
  auto manual_cfg = cfg;
  manual_cfg.seed = 4;
  auto m = cnn::build_model(manual_cfg, Vocabulary::build(experiment::token_lists(split.train), cfg.min_count),
                            experiment::label_order(corpus));
  cnn::train(m, split);
  const auto manual = experiment::make_result(4, cnn::predict(m, split.test), experiment::label_order(corpus));
  CHECK(metrics::to_json(manual.report) == metrics::to_json(runs[0].result.report));

  experiment::ExperimentOptions five;
  const auto all = experiment::run_cnn(corpus, cfg, five);
  REQUIRE(all.size() == 5);
  std::set<std::vector<std::string>> partitions;
  for (const auto& r : all) {
    std::vector<std::string> ids;
    for (const auto& d : r.test) ids.push_back(d.id);
    partitions.insert(ids);
  }
  CHECK(partitions.size() == 5);

  const auto again = experiment::run_cnn(corpus, cfg, five);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(experiment::predictions_jsonl(again[i].result.predictions) ==
          experiment::predictions_jsonl(all[i].result.predictions));
    CHECK(metrics::to_json(again[i].result.report).dump() == metrics::to_json(all[i].result.report).dump());
  }
}
