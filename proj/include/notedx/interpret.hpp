#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "notedx/cnn.hpp"

namespace notedx::interpret {

struct FilterId {
  std::size_t bank = 0;
  std::size_t filter = 0;
  bool operator==(const FilterId&) const = default;
  auto operator<=>(const FilterId&) const = default;
};

struct NgramActivation {
  FilterId filter;
  std::string document;
  /// Index of the first token of the window in the document.
  std::size_t position = 0;
  std::vector<std::string> tokens;
  double score = 0;

  std::string text() const;
  bool operator==(const NgramActivation&) const = default;
};

struct FilterRanking {
  FilterId filter;
  std::size_t height = 0;
  /// Sorted by descending score, ties by (document id, position).
  std::vector<NgramActivation> top;

  bool operator==(const FilterRanking&) const = default;
};

/// Every filter of the model, bank by bank.
std::vector<FilterId> all_filters(const cnn::CnnModel& model);

/// `per_size` filters drawn from each bank by a seeded shuffle, sorted.
std::vector<FilterId> select_filters(const cnn::CnnModel& model, std::size_t per_size,
                                     std::uint64_t seed);

/// Scores every window that lies entirely on real tokens (no padding on
/// either side) by the filter's post-activation output, and keeps the top
/// `top_n` per filter. An empty `filters` list means all filters.
std::vector<FilterRanking> rank_ngrams(const cnn::CnnModel& model, const std::vector<Document>& docs,
                                       std::size_t top_n = 10, std::vector<FilterId> filters = {});

/// Post-activation output of one filter for the window starting at token
/// `position` of `tokens`.
double window_score(const cnn::CnnModel& model, const std::vector<std::string>& tokens,
                    FilterId filter, std::size_t position);

/// One tab-separated column per filter, one row per rank.
std::string render_tsv(const std::vector<FilterRanking>& rankings);
nlohmann::json to_json(const std::vector<FilterRanking>& rankings);
std::vector<FilterRanking> rankings_from_json(const nlohmann::json& j);

}  // namespace notedx::interpret
