#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "notedx/binary_io.hpp"

namespace notedx {

/// Word <-> index map. Index 0 is padding and index 1 the unknown word; real
/// words follow in order of descending corpus frequency, ties lexicographic.
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary() = default;

  /// Keeps words seen at least `min_count` times. Throws when the corpus is
  /// empty or nothing survives.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                          std::size_t min_count = 2);

  /// Rebuilds from an explicit word list (index order) and counts.
  static Vocabulary from_entries(std::vector<std::string> words, std::vector<std::uint64_t> counts);

  std::optional<std::int32_t> find(std::string_view word) const;
  /// Index of the word, or kUnk.
  std::int32_t index(std::string_view word) const;
  std::vector<std::int32_t> encode(const std::vector<std::string>& tokens) const;

  const std::string& word(std::int32_t index) const { return words_.at(static_cast<std::size_t>(index)); }
  std::uint64_t count(std::int32_t index) const { return counts_.at(static_cast<std::size_t>(index)); }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  void write(io::BinaryWriter& w) const;
  static Vocabulary read(io::BinaryReader& r);

  bool operator==(const Vocabulary& other) const {
    return words_ == other.words_ && counts_ == other.counts_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::int32_t> index_;
};

}  // namespace notedx
