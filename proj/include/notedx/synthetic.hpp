#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "notedx/textprep.hpp"

namespace notedx::synth {

enum class SignalMode {
  /// Each class owns signature tokens no other class uses.
  Keyword,
  /// Classes come in pairs whose signature bigrams are the same two tokens in
  /// opposite order; the tokens are also scattered as noise, so bag-of-words
  /// counts cannot tell the two classes of a pair apart.
  Order,
};

/// Class names and relative sizes of the ten most frequent diagnoses in the
/// reference admission-note corpus.
std::vector<std::string> reference_classes();
std::vector<std::uint64_t> reference_counts();
std::vector<double> reference_weights();

struct SyntheticSpec {
  std::vector<std::string> classes = reference_classes();
  /// Relative class sizes; empty means equal sizes.
  std::vector<double> weights = reference_weights();
  std::size_t documents = 13140;
  std::size_t phrases_per_class = 2;
  std::size_t phrase_length = 2;
  /// Signature phrase occurrences inserted per document, drawn from [min, max].
  std::size_t min_occurrences = 1;
  std::size_t max_occurrences = 2;
  std::size_t noise_vocabulary = 2000;
  std::size_t min_length = 20;
  std::size_t max_length = 60;
  /// Probability that a noise slot holds a number or a de-identified span.
  double placeholder_rate = 0.02;
  SignalMode mode = SignalMode::Keyword;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Largest-remainder apportionment of `total` items by `weights`; ties go to
/// the lower index.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights);

/// signatures[c] holds the phrases (token lists) of class c.
std::vector<std::vector<std::vector<std::string>>> signature_phrases(const SyntheticSpec& spec);

std::vector<std::string> noise_words(std::size_t count);

/// Raw notes in a seeded random order; ids are "syn-000001", ...
std::vector<RawNote> generate(const SyntheticSpec& spec);

/// One JSON object per line, byte-identical for a fixed spec.
std::string to_jsonl(const std::vector<RawNote>& notes);

/// True when `window` contains one of the phrases as a contiguous run.
bool contains_phrase(const std::vector<std::string>& window,
                     const std::vector<std::vector<std::string>>& phrases);

}  // namespace notedx::synth
