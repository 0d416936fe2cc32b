#include "notedx/vocabulary.hpp"

#include <algorithm>
#include <map>

namespace notedx {

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             std::size_t min_count) {
  std::map<std::string, std::uint64_t> freq;
  for (const auto& sentence : corpus) {
    for (const auto& token : sentence) ++freq[token];
  }
  require(!freq.empty(), ErrorCode::EmptyInput, "cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [word, count] : freq) {
    if (count >= min_count && word != kPadToken && word != kUnkToken) kept.emplace_back(word, count);
  }
  require(!kept.empty(), ErrorCode::EmptyInput,
          "no word reaches the minimum count of " + std::to_string(min_count));
  // std::map iteration is lexicographic, so a stable sort keeps ties in that order.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> words{std::string(kPadToken), std::string(kUnkToken)};
  std::vector<std::uint64_t> counts{0, 0};
  for (auto& [word, count] : kept) {
    words.push_back(word);
    counts.push_back(count);
  }
  return from_entries(std::move(words), std::move(counts));
}

Vocabulary Vocabulary::from_entries(std::vector<std::string> words,
                                    std::vector<std::uint64_t> counts) {
  require(words.size() == counts.size(), ErrorCode::InvalidArgument,
          "vocabulary words and counts differ in length");
  Vocabulary v;
  v.words_ = std::move(words);
  v.counts_ = std::move(counts);
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    if (!v.index_.emplace(v.words_[i], static_cast<std::int32_t>(i)).second) {
      fail(ErrorCode::CorruptFile, "duplicate vocabulary word '" + v.words_[i] + "'");
    }
  }
  return v;
}

std::optional<std::int32_t> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::int32_t Vocabulary::index(std::string_view word) const { return find(word).value_or(kUnk); }

std::vector<std::int32_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index(t));
  return ids;
}

void Vocabulary::write(io::BinaryWriter& w) const {
  w.put<std::uint64_t>(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    w.put_string(words_[i]);
    w.put<std::uint64_t>(counts_[i]);
  }
}

Vocabulary Vocabulary::read(io::BinaryReader& r) {
  const auto n = r.get<std::uint64_t>();
  if (n > (std::uint64_t{1} << 32)) fail(ErrorCode::CorruptFile, "implausible vocabulary size");
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  for (std::uint64_t i = 0; i < n; ++i) {
    words.push_back(r.get_string());
    counts.push_back(r.get<std::uint64_t>());
  }
  return from_entries(std::move(words), std::move(counts));
}

}  // namespace notedx
