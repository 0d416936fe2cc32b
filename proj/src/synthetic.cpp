#include "notedx/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "notedx/corpus_io.hpp"
#include "notedx/error.hpp"
#include "notedx/random.hpp"

namespace notedx::synth {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstv";
constexpr std::string_view kVowels = "aeiou";

std::string syllables(std::size_t index, std::size_t count) {
  const std::size_t base = kConsonants.size() * kVowels.size();
  std::string word;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t digit = index % base;
    index /= base;
    word += kConsonants[digit / kVowels.size()];
    word += kVowels[digit % kVowels.size()];
  }
  return word;
}

/// Signature tokens start with 'x', which no noise word does.
std::string signature_token(std::size_t index) { return "x" + syllables(index, 2); }

using Phrase = std::vector<std::string>;

}  // namespace

std::vector<std::string> reference_classes() {
  return {"coronary artery disease", "hemorrhage",       "pneumonia",
          "myocardial infarction",   "gastrointestinal bleeding", "fracture",
          "aortic stenosis",         "cardiac failure",  "prematurity",
          "stroke"};
}

std::vector<std::uint64_t> reference_counts() {
  return {3193, 1955, 1634, 1229, 1158, 1047, 934, 927, 559, 504};
}

std::vector<double> reference_weights() {
  const auto counts = reference_counts();
  return {counts.begin(), counts.end()};
}

void SyntheticSpec::validate() const {
  require(!classes.empty(), ErrorCode::InvalidArgument, "at least one class is required");
  require(std::set<std::string>(classes.begin(), classes.end()).size() == classes.size(),
          ErrorCode::InvalidArgument, "class names must be distinct");
  require(weights.empty() || weights.size() == classes.size(), ErrorCode::InvalidArgument,
          "one weight per class is required");
  for (double w : weights) {
    require(std::isfinite(w) && w > 0, ErrorCode::InvalidArgument, "class weights must be positive");
  }
  require(documents >= 1, ErrorCode::InvalidArgument, "at least one document is required");
  require(phrases_per_class >= 1, ErrorCode::InvalidArgument, "at least one phrase per class");
  require(phrase_length >= 1, ErrorCode::InvalidArgument, "phrase length must be positive");
  require(mode != SignalMode::Order || phrase_length >= 2, ErrorCode::InvalidArgument,
          "order mode needs phrases of at least two tokens");
  require(min_occurrences >= 1 && min_occurrences <= max_occurrences, ErrorCode::InvalidArgument,
          "occurrence range is invalid");
  require(noise_vocabulary >= 1, ErrorCode::InvalidArgument, "noise vocabulary must be nonempty");
  require(min_length <= max_length, ErrorCode::InvalidArgument, "length range is invalid");
  const std::size_t extra = mode == SignalMode::Order ? max_occurrences : 0;
  require(min_length >= max_occurrences * phrase_length + extra, ErrorCode::InvalidArgument,
          "minimum length cannot hold the signature phrases");
  require(placeholder_rate >= 0 && placeholder_rate < 1, ErrorCode::InvalidArgument,
          "placeholder rate must be in [0, 1)");
}

std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
  require(!weights.empty(), ErrorCode::InvalidArgument, "no weights to apportion");
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> counts(weights.size());
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % order.size()]];
  return counts;
}

std::vector<std::string> noise_words(std::size_t count) {
  std::vector<std::string> words;
  words.reserve(count);
  const std::size_t base = kConsonants.size() * kVowels.size();
  for (std::size_t i = 0; i < count; ++i) {
    // Two syllables cover the first base^2 words, three the rest.
    words.push_back(i < base * base ? syllables(i, 2) : syllables(i, 3));
  }
  return words;
}

std::vector<std::vector<Phrase>> signature_phrases(const SyntheticSpec& spec) {
  const std::size_t k = spec.classes.size();
  const std::size_t p = spec.phrases_per_class;
  const std::size_t n = spec.phrase_length;
  std::vector<std::vector<Phrase>> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t group = spec.mode == SignalMode::Order ? c / 2 : c;
    for (std::size_t i = 0; i < p; ++i) {
      Phrase phrase;
      for (std::size_t t = 0; t < n; ++t) phrase.push_back(signature_token((group * p + i) * n + t));
      if (spec.mode == SignalMode::Order && c % 2 == 1) std::reverse(phrase.begin(), phrase.end());
      out[c].push_back(std::move(phrase));
    }
  }
  return out;
}

bool contains_phrase(const std::vector<std::string>& window, const std::vector<Phrase>& phrases) {
  for (const auto& phrase : phrases) {
    if (phrase.empty() || phrase.size() > window.size()) continue;
    if (std::search(window.begin(), window.end(), phrase.begin(), phrase.end()) != window.end()) {
      return true;
    }
  }
  return false;
}

std::vector<RawNote> generate(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t k = spec.classes.size();
  const auto counts =
      apportion(spec.documents, spec.weights.empty() ? std::vector<double>(k, 1.0) : spec.weights);
  const auto signatures = signature_phrases(spec);
  const auto noise = noise_words(spec.noise_vocabulary);
  std::vector<std::string> signature_pool;
  for (const auto& phrases : signatures) {
    for (const auto& phrase : phrases) signature_pool.insert(signature_pool.end(), phrase.begin(), phrase.end());
  }
  std::sort(signature_pool.begin(), signature_pool.end());
  signature_pool.erase(std::unique(signature_pool.begin(), signature_pool.end()), signature_pool.end());

  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < k; ++c) labels.insert(labels.end(), counts[c], c);
  Rng rng(mix_seed(spec.seed, 0x5E7));
  shuffle(std::span<std::size_t>(labels), rng);

  std::vector<RawNote> notes;
  notes.reserve(labels.size());
  for (std::size_t d = 0; d < labels.size(); ++d) {
    const std::size_t c = labels[d];
    std::vector<Phrase> foreign;
    for (std::size_t o = 0; o < k; ++o) {
      if (o != c) foreign.insert(foreign.end(), signatures[o].begin(), signatures[o].end());
    }
    std::vector<std::string> tokens;
    // Rejection keeps other classes' phrases from forming by accident.
    do {
      const std::size_t length =
          spec.min_length + uniform_index(rng, spec.max_length - spec.min_length + 1);
      const std::size_t occurrences =
          spec.min_occurrences + uniform_index(rng, spec.max_occurrences - spec.min_occurrences + 1);
      const std::size_t scattered = spec.mode == SignalMode::Order ? occurrences : 0;
      const std::size_t noise_count = length - occurrences * spec.phrase_length - scattered;

      std::vector<Phrase> units;
      for (std::size_t i = 0; i < noise_count; ++i) {
        if (uniform01(rng) < spec.placeholder_rate) {
          units.push_back({uniform01(rng) < 0.5 ? std::to_string(uniform_index(rng, 200))
                                                : "[**2101-" + std::to_string(1 + uniform_index(rng, 12)) + "-" +
                                                      std::to_string(1 + uniform_index(rng, 28)) + "**]"});
        } else {
          units.push_back({noise[uniform_index(rng, noise.size())]});
        }
      }
      for (std::size_t i = 0; i < scattered; ++i) {
        units.push_back({signature_pool[uniform_index(rng, signature_pool.size())]});
      }
      for (std::size_t i = 0; i < occurrences; ++i) {
        units.push_back(signatures[c][uniform_index(rng, signatures[c].size())]);
      }
      shuffle(std::span<Phrase>(units), rng);
      tokens.clear();
      for (const auto& unit : units) tokens.insert(tokens.end(), unit.begin(), unit.end());
    } while (contains_phrase(tokens, foreign));

    RawNote note;
    note.id = "syn-" + std::string(6 - std::min<std::size_t>(6, std::to_string(d + 1).size()), '0') +
              std::to_string(d + 1);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) note.text += ' ';
      note.text += tokens[i];
    }
    note.label = spec.classes[c];
    notes.push_back(std::move(note));
  }
  return notes;
}

std::string to_jsonl(const std::vector<RawNote>& notes) {
  std::string out;
  for (const auto& note : notes) {
    out += raw_note_json(note);
    out += '\n';
  }
  return out;
}

}  // namespace notedx::synth
