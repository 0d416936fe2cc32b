#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace notedx {

/// A note as it arrives from the source system.
struct RawNote {
  std::string id;
  std::string text;
  std::map<std::string, std::string> sections;
  std::optional<std::string> label;
};

/// A cleaned, tokenized note with its canonical diagnosis.
struct Document {
  std::string id;
  std::vector<std::string> tokens;
  std::optional<std::string> label;

  bool operator==(const Document&) const = default;
};

inline constexpr std::string_view kPlaceholderToken = "***";

/// Sections that make up the admission-time view of a note.
std::vector<std::string> default_admission_sections();

/// Produces a single normalized line:
///  - selected sections (or the whole text when the note carries none),
///  - de-identification spans `[** ... **]` and standalone numbers -> `***`,
///  - every character outside [a-z0-9*] split out as its own token,
///  - letters lowercased, whitespace collapsed to single spaces.
std::string clean_note(const RawNote& raw, const std::vector<std::string>& admission_sections = {});
std::string clean_text(std::string_view text);

std::vector<std::string> split_tokens(std::string_view line);

/// Lowercases and collapses whitespace; this is the key form for label lookup.
std::string normalize_label(std::string_view label);

struct DiagnosisRules {
  /// Matched at the start of a line, case-insensitive, followed by ':' or end of line.
  std::vector<std::string> headers = {"discharge diagnosis", "primary diagnosis", "diagnosis"};
  std::string delimiters = ",;";
};

/// First item listed under the first diagnosis header in the note.
std::optional<std::string> extract_primary_diagnosis(const RawNote& raw,
                                                     const DiagnosisRules& rules = {});

// ---------------------------------------------------------------- aliases

/// Manually curated groups of surface forms that name the same disease.
class AliasMap {
 public:
  struct Group {
    std::string canonical;
    std::vector<std::string> aliases;
  };

  AliasMap() = default;

  /// Adds a group; the canonical name is always a member of its own group.
  /// Throws if any alias already belongs to a different group.
  void add_group(std::string_view canonical, const std::vector<std::string>& aliases);

  /// Canonical name for a label, or the label itself when no group has it.
  std::string resolve(std::string_view label) const;

  const std::vector<Group>& groups() const noexcept { return groups_; }

  /// `canonical<TAB>alias<TAB>...` per line; `#` lines and blank lines skipped.
  static AliasMap load(const std::filesystem::path& path);
  static AliasMap parse(std::string_view text);

 private:
  std::vector<Group> groups_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

std::string resolve_alias(std::string_view raw_label, const AliasMap& map);

// ---------------------------------------------------------------- corpus shaping

/// Nearest-rank 90th percentile of document lengths.
std::size_t compute_truncation_length(const std::vector<Document>& corpus);
std::size_t nearest_rank(std::vector<std::size_t> values, std::uint32_t percent);

Document truncate(Document doc, std::size_t max_length);

struct LabelFilterResult {
  std::vector<Document> corpus;
  /// Retained labels, most frequent first, ties lexicographic.
  std::vector<std::string> labels;
  std::vector<std::size_t> counts;
};

LabelFilterResult filter_top_k_labels(const std::vector<Document>& corpus, std::size_t k);

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct CorpusSplit {
  std::vector<Document> train;
  std::vector<Document> validation;
  std::vector<Document> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

/// Seeded uniform shuffle, then contiguous slices at floor(r_train*T) and
/// floor((r_train+r_val)*T).
CorpusSplit split_dataset(const std::vector<Document>& corpus, std::uint64_t seed,
                          SplitRatios ratios = {});

/// Full preprocessing of one raw note: clean, take the label (given or
/// extracted), resolve aliases.
Document preprocess_note(const RawNote& raw, const AliasMap& aliases,
                         const std::vector<std::string>& admission_sections = {},
                         const DiagnosisRules& rules = {});

}  // namespace notedx
