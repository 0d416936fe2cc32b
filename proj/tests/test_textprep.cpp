#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "notedx/random.hpp"
#include "notedx/textprep.hpp"
#include "oracles.hpp"

using namespace notedx;
using oracle::code_of;

namespace {

Document doc(std::string id, std::size_t length, std::string label = "x") {
  return Document{std::move(id), std::vector<std::string>(length, "w"), std::move(label)};
}

}  // namespace

TEST_CASE("clean_text golden cases") {
  // Worked by hand from the cleaning rules: placeholders, numbers -> ***,
  // every other symbol split out, lowercase, single spaces.
  const std::vector<std::pair<std::string, std::string>> golden = {
      {"Chest  Pain,\nSOB on [**2101-3-4**]", "chest pain , sob on ***"},
      {"", ""},
      {"ABC", "abc"},
      {"BP 120/80", "bp *** / ***"},
      {"temp 98.6F", "temp *** . 6f"},
      {"   leading and trailing   ", "leading and trailing"},
      {"tab\tseparated\r\nlines", "tab separated lines"},
      {"[**Hospital1 18**] admission", "*** admission"},
      {"pt is a 65 y/o M", "pt is a *** y / o m"},
      {"hx: CAD, s/p CABG.", "hx : cad , s / p cabg ."},
      {"x2 days", "x2 days"},
      {"(a)", "( a )"},
      {"2101", "***"},
      {"***", "***"},
      {"no [** unterminated", "no [ ** unterminated"},
      {"a--b", "a - - b"},
      {"Pain 10/10!!", "pain *** / *** ! !"},
      {"caf\xC3\xA9", "caf \xC3\xA9"},
      {"[**2101-3-4**][**Name**]", "*** ***"},
      {"HR 88 , RR 16", "hr *** , rr ***"},
  };
  REQUIRE(golden.size() == 20);
  for (const auto& [in, want] : golden) {
    CAPTURE(in);
    CHECK(clean_text(in) == want);
  }
}

TEST_CASE("clean_note keeps admission sections in order") {
  RawNote raw;
  raw.text = "ignored when sections exist";
  raw.sections = {{"Physical Exam", "HR 88"},
                  {"Chief Complaint", "Chest pain"},
                  {"Discharge Diagnosis", "STEMI"}};
  CHECK(clean_note(raw) == "chest pain hr ***");
  CHECK(clean_note(raw, {"discharge diagnosis"}) == "stemi");

  RawNote plain;
  plain.text = "Fever 39";
  CHECK(clean_note(plain) == "fever ***");
}

TEST_CASE("clean_text is idempotent on random input") {
  Rng rng(11);
  const std::string alphabet = "abcXYZ019 ,./-*[]()\n\t:;!";
  for (int n = 0; n < 300; ++n) {
    std::string s;
    const auto len = uniform_index(rng, 40);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[uniform_index(rng, alphabet.size())];
    if (uniform_index(rng, 3) == 0) s += "[**2101-1-1**]";
    const auto once = clean_text(s);
    CHECK(clean_text(once) == once);
  }
}

TEST_CASE("extract_primary_diagnosis") {
  RawNote raw;
  raw.text = "Admission\nDischarge Diagnosis:\nPneumonia\nCHF\n";
  CHECK(extract_primary_diagnosis(raw) == std::optional<std::string>("pneumonia"));

  raw.text = "history only, nothing else";
  CHECK_FALSE(extract_primary_diagnosis(raw).has_value());

  raw.text = "DIAGNOSIS: STEMI, hypertension";
  CHECK(extract_primary_diagnosis(raw) == std::optional<std::string>("stemi"));

  raw.text = "Primary Diagnosis:\n\n1. Stroke; atrial fibrillation";
  CHECK(extract_primary_diagnosis(raw) == std::optional<std::string>("stroke"));

  RawNote sectioned;
  sectioned.sections = {{"Discharge Diagnosis", "Fracture\nAnemia"}};
  CHECK(extract_primary_diagnosis(sectioned) == std::optional<std::string>("fracture"));
}

TEST_CASE("alias resolution") {
  const auto map = AliasMap::parse(
      "# group\n"
      "st segment elevation myocardial infarction\tstemi\tst-elevation mi\tst elevation mi\n"
      "\n"
      "cardiac failure\tchf\tcongestive heart failure\n");
  CHECK(resolve_alias("stemi", map) == "st segment elevation myocardial infarction");
  CHECK(resolve_alias("st-elevation mi", map) == "st segment elevation myocardial infarction");
  CHECK(resolve_alias("STEMI", map) == "st segment elevation myocardial infarction");
  CHECK(resolve_alias("pneumonia", map) == "pneumonia");
  CHECK(resolve_alias("CHF", map) == "cardiac failure");

  for (const auto& label : {"stemi", "chf", "pneumonia", "cardiac failure"}) {
    const auto once = resolve_alias(label, map);
    CHECK(resolve_alias(once, map) == once);
  }

  AliasMap clash;
  clash.add_group("a", {"x"});
  CHECK(code_of([&] { clash.add_group("b", {"x"}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("preprocess_note resolves the extracted label") {
  AliasMap map;
  map.add_group("st segment elevation myocardial infarction", {"stemi"});
  RawNote raw;
  raw.id = "n1";
  raw.text = "Chest pain 2 days\nDiagnosis: STEMI, HTN";
  const auto d = preprocess_note(raw, map);
  CHECK(d.id == "n1");
  CHECK(d.label == std::optional<std::string>("st segment elevation myocardial infarction"));
  CHECK(d.tokens.front() == "chest");
}

TEST_CASE("nearest-rank truncation length") {
  std::vector<Document> corpus;
  for (std::size_t n = 1; n <= 10; ++n) corpus.push_back(doc("d", n));
  CHECK(compute_truncation_length(corpus) == 9);

  corpus.assign(5, doc("d", 7));
  CHECK(compute_truncation_length(corpus) == 7);

  corpus = {doc("a", 5), doc("b", 100)};
  CHECK(compute_truncation_length(corpus) == 100);

  CHECK(code_of([] { compute_truncation_length({}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("truncate") {
  Document d{"d", {}, "x"};
  for (int i = 0; i < 120; ++i) d.tokens.push_back("t" + std::to_string(i));
  const auto cut = truncate(d, 100);
  CHECK(cut.tokens.size() == 100);
  CHECK(std::equal(cut.tokens.begin(), cut.tokens.end(), d.tokens.begin()));

  d.tokens.resize(80);
  CHECK(truncate(d, 100) == d);
  d.tokens.resize(100);
  CHECK(truncate(d, 100) == d);
}

TEST_CASE("filter_top_k_labels") {
  std::vector<Document> corpus;
  for (int i = 0; i < 5; ++i) corpus.push_back(doc("a" + std::to_string(i), 1, "a"));
  for (int i = 0; i < 5; ++i) corpus.push_back(doc("b" + std::to_string(i), 1, "b"));
  corpus.push_back(doc("c0", 1, "c"));
  const auto kept = filter_top_k_labels(corpus, 2);
  CHECK(kept.labels == std::vector<std::string>{"a", "b"});
  CHECK(kept.counts == std::vector<std::size_t>{5, 5});
  CHECK(kept.corpus.size() == 10);

  std::vector<Document> single(4, doc("s", 2, "only"));
  CHECK(filter_top_k_labels(single, 1).corpus == single);

  // Reference label distribution: everything survives with k = 10.
  const std::vector<std::size_t> counts = {3193, 1955, 1634, 1229, 1158, 1047, 934, 927, 559, 504};
  std::vector<Document> big;
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (std::size_t i = 0; i < counts[c]; ++i) big.push_back(doc("d", 1, "class" + std::to_string(c)));
  for (int i = 0; i < 12; ++i) big.push_back(doc("r", 1, "rare" + std::to_string(i)));
  const auto top = filter_top_k_labels(big, 10);
  CHECK(top.corpus.size() == 13140);
  CHECK(top.counts == counts);
}

TEST_CASE("split_dataset sizes and determinism") {
  std::vector<Document> corpus;
  for (int i = 0; i < 100; ++i) corpus.push_back(doc("d" + std::to_string(i), 1));
  const auto s = split_dataset(corpus, 3);
  CHECK(s.train.size() == 70);
  CHECK(s.validation.size() == 15);
  CHECK(s.test.size() == 15);

  std::set<std::string> ids;
  for (const auto* part : {&s.train, &s.validation, &s.test})
    for (const auto& d : *part) ids.insert(d.id);
  CHECK(ids.size() == 100);

  const auto again = split_dataset(corpus, 3);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK(split_dataset(corpus, 4).train != s.train);

  std::vector<Document> big(13140, doc("d", 1));
  const auto b = split_dataset(big, 1);
  CHECK(b.train.size() == 9198);
  CHECK(b.validation.size() == 1971);
  CHECK(b.test.size() == 1971);

  CHECK(code_of([&] { split_dataset(corpus, 1, {0.5, 0.5, 0.5}); }) == ErrorCode::InvalidArgument);
}
