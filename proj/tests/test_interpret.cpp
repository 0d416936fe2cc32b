#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "notedx/cnn.hpp"
#include "notedx/experiment.hpp"
#include "notedx/interpret.hpp"
#include "oracles.hpp"

using namespace notedx;
using namespace notedx::interpret;

namespace {

// Class "marked" documents carry the trigram "marker alpha beta" somewhere
// in filler text; class "plain" documents are filler only.
std::vector<Document> marker_corpus(std::size_t n, std::uint64_t seed) {
  const std::vector<std::string> filler = {"ka", "lo", "mi", "nu", "pe", "ra", "si", "tu",
                                           "vo", "we", "xa", "yo", "zu", "bo", "de", "fi"};
  Rng rng(seed);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    Document d;
    d.id = "doc" + std::to_string(1000 + i);
    const std::size_t len = 8 + uniform_index(rng, 8);
    for (std::size_t t = 0; t < len; ++t) d.tokens.push_back(filler[uniform_index(rng, filler.size())]);
    if (i % 2 == 0) {
      const auto at = static_cast<std::ptrdiff_t>(uniform_index(rng, len - 2));
      d.tokens.insert(d.tokens.begin() + at, {"marker", "alpha", "beta"});
      d.label = "marked";
    } else {
      d.label = "plain";
    }
    docs.push_back(d);
  }
  return docs;
}

cnn::CnnModel small_model(std::uint64_t seed) {
  cnn::CnnConfig cfg;
  cfg.embed_dim = 6;
  cfg.filters = {{2, 3}, {3, 4}};
  cfg.max_length = 12;
  cfg.min_count = 1;
  cfg.seed = seed;
  return cnn::build_model(cfg, Vocabulary::build({{"a", "b", "c", "d", "e"}}, 1), {"x", "y"});
}

}  // namespace

TEST_CASE("filter selection") {
  const auto m = small_model(1);
  CHECK(all_filters(m).size() == 7);
  const auto picked = select_filters(m, 2, 9);
  REQUIRE(picked.size() == 4);
  CHECK(std::is_sorted(picked.begin(), picked.end()));
  CHECK(picked[0].bank == 0);
  CHECK(picked[3].bank == 1);
  CHECK(select_filters(m, 2, 9) == picked);
  CHECK(select_filters(m, 10, 1).size() == 7);
}

TEST_CASE("ranking covers every full window when top_n is large") {
  const auto m = small_model(2);
  const std::vector<Document> docs = {{"d1", {"a", "b", "c", "d"}, "x"}, {"d2", {"e", "a", "zz"}, "y"}};
  const auto r = rank_ngrams(m, docs, 100);
  REQUIRE(r.size() == 7);
  for (const auto& f : r) {
    // A height-h window fits at len - h + 1 starts in each document.
    CHECK(f.top.size() == (4 - f.height + 1) + (3 - f.height + 1));
    for (std::size_t i = 1; i < f.top.size(); ++i) CHECK(f.top[i - 1].score >= f.top[i].score);
    for (const auto& a : f.top) {
      CHECK(a.tokens.size() == f.height);
      const auto& src = a.document == "d1" ? docs[0].tokens : docs[1].tokens;
      CHECK(std::equal(a.tokens.begin(), a.tokens.end(), src.begin() + static_cast<std::ptrdiff_t>(a.position)));
      CHECK(a.score == window_score(m, src, f.filter, a.position));
    }
  }
  CHECK(oracle::code_of([&] { rank_ngrams(m, {}, 3); }) == ErrorCode::EmptyInput);
}

TEST_CASE("top score is the largest full-window conv output") {
  const auto m = small_model(3);
  Rng rng(3);
  std::vector<Document> docs;
  for (int i = 0; i < 10; ++i) {
    Document d{"d" + std::to_string(i), {}, "x"};
    for (int t = 0; t < 10; ++t) d.tokens.push_back(std::string(1, static_cast<char>('a' + uniform_index(rng, 5))));
    docs.push_back(d);
  }
  const auto ranked = rank_ngrams(m, docs, 1);
  for (const auto& f : ranked) {
    const auto& bank = m.banks[f.filter.bank];
    const std::size_t lead = nn::leading_padding(bank.height());
    double best = -1e300;
    for (const auto& d : docs) {
      Rng unused(0);
      const auto pass = cnn::forward(m, cnn::encode_document(m, d.tokens), nn::Mode::Infer, unused);
      const auto& out = pass.conv[f.filter.bank].output;
      for (std::size_t start = 0; start + bank.height() <= d.tokens.size(); ++start)
        best = std::max(best, out(start + lead, f.filter.filter));
    }
    REQUIRE(f.top.size() == 1);
    CHECK(f.top[0].score == best);
  }
}

TEST_CASE("a trained filter locks onto the planted trigram") {
  const auto corpus = marker_corpus(400, 5);
  const auto split = split_dataset(corpus, 1);
  cnn::CnnConfig cfg;
  cfg.embed_dim = 16;
  cfg.filters = {{3, 4}};
  cfg.learning_rate = 0.01;
  cfg.batch_size = 16;
  cfg.max_epochs = 15;
  cfg.min_count = 1;
  auto m = cnn::build_model(cfg, Vocabulary::build(experiment::token_lists(split.train), 1), {"marked", "plain"});
  cnn::train(m, split);

  // The filter that pushes hardest toward "marked".
  std::size_t pick = 0;
  double margin = -1e300;
  for (std::size_t f = 0; f < 4; ++f) {
    const double w = m.dense_weights(0, f) - m.dense_weights(1, f);
    if (w > margin) margin = w, pick = f;
  }
  const auto ranked = rank_ngrams(m, split.test, 10, {{0, pick}});
  REQUIRE(ranked[0].top.size() == 10);
  std::size_t hits = 0;
  for (const auto& a : ranked[0].top)
    hits += std::find(a.tokens.begin(), a.tokens.end(), "marker") != a.tokens.end();
  CHECK(hits >= 8);
}

TEST_CASE("table rendering and JSON") {
  const auto m = small_model(4);
  const std::vector<Document> docs = {{"d1", {"a", "b", "c", "d", "e"}, "x"}};
  const auto r = rank_ngrams(m, docs, 3, {{1, 0}, {1, 2}});
  const auto tsv = render_tsv(r);
  std::istringstream in(tsv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 4);  // header plus three ranks
  CHECK(lines[0] == "3-gram bank 1 filter 0\t3-gram bank 1 filter 2");
  for (const auto& l : lines) CHECK(std::count(l.begin(), l.end(), '\t') == 1);
  CHECK(render_tsv({}).empty());

  CHECK(rankings_from_json(to_json(r)) == r);
  CHECK(rankings_from_json(nlohmann::json::parse(to_json(r).dump())) == r);
}
