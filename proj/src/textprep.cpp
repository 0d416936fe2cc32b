#include "notedx/textprep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "notedx/error.hpp"
#include "notedx/random.hpp"

namespace notedx {

namespace {

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' ||
         c == 0x00A0;
}

bool is_word_char(char32_t c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '*';
}

char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  // Latin-1 supplement capitals, excluding the multiplication sign.
  if (c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) return c + 32;
  return c;
}

/// Decodes one code point starting at text[i]; malformed bytes map to U+FFFD.
char32_t decode(std::string_view text, std::size_t& i) {
  const auto lead = static_cast<unsigned char>(text[i]);
  std::size_t extra = 0;
  char32_t cp = 0;
  if (lead < 0x80) {
    ++i;
    return lead;
  } else if ((lead & 0xE0) == 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3;
    cp = lead & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + extra >= text.size()) {
    ++i;
    return 0xFFFD;
  }
  for (std::size_t k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += extra + 1;
  return cp;
}

void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

/// Replaces every `[** ... **]` span with a standalone placeholder.
std::string mask_placeholders(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find("[**", pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = text.find("**]", open + 3);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    out.append(" ");
    out.append(kPlaceholderToken);
    out.append(" ");
    pos = close + 3;
  }
  out.append(text.substr(pos));
  return out;
}

bool all_digits(std::string_view token) {
  return !token.empty() &&
         std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      std::string_view line = text.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.emplace_back(line);
      start = i + 1;
    }
  }
  return lines;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<std::string> default_admission_sections() {
  return {"chief complaint",      "history of present illness", "past medical history",
          "social history",       "family history",             "medications on admission",
          "allergies",            "physical exam"};
}

std::string clean_text(std::string_view text) {
  const std::string masked = mask_placeholders(text);
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    tokens.push_back(all_digits(word) ? std::string(kPlaceholderToken) : word);
    word.clear();
  };
  std::size_t i = 0;
  while (i < masked.size()) {
    const char32_t cp = to_lower(decode(masked, i));
    if (is_space(cp)) {
      flush();
    } else if (is_word_char(cp)) {
      word.push_back(static_cast<char>(cp));
    } else {
      flush();
      std::string symbol;
      encode(cp, symbol);
      tokens.push_back(std::move(symbol));
    }
  }
  flush();

  std::string out;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (t) out.push_back(' ');
    out += tokens[t];
  }
  return out;
}

std::string clean_note(const RawNote& raw, const std::vector<std::string>& admission_sections) {
  if (raw.sections.empty()) return clean_text(raw.text);
  const std::vector<std::string> wanted =
      admission_sections.empty() ? default_admission_sections() : admission_sections;
  std::map<std::string, const std::string*> by_name;
  for (const auto& [name, body] : raw.sections) by_name[normalize_label(name)] = &body;
  std::string joined;
  for (const auto& name : wanted) {
    auto it = by_name.find(normalize_label(name));
    if (it == by_name.end()) continue;
    joined += ' ';
    joined += *it->second;
  }
  return clean_text(joined);
}

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

std::string normalize_label(std::string_view label) {
  std::string out;
  bool pending_space = false;
  for (char c : label) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

namespace {

std::string strip_enumeration(std::string item) {
  item = trim(item);
  std::size_t i = 0;
  while (i < item.size() && std::isdigit(static_cast<unsigned char>(item[i]))) ++i;
  if (i > 0 && i < item.size() && (item[i] == '.' || item[i] == ')')) {
    item = trim(std::string_view(item).substr(i + 1));
  } else if (!item.empty() && (item[0] == '-' || item[0] == '*')) {
    item = trim(std::string_view(item).substr(1));
  }
  return item;
}

std::optional<std::string> first_item(std::string_view body, const std::string& delimiters) {
  const std::size_t cut = body.find_first_of(delimiters);
  std::string item = strip_enumeration(std::string(body.substr(0, cut)));
  item = normalize_label(item);
  if (item.empty()) return std::nullopt;
  return item;
}

/// Returns the text after the header when the line opens with it.
std::optional<std::string> match_header(const std::string& line, const std::string& header) {
  const std::string lowered = ascii_lower(trim(line));
  const std::string key = normalize_label(header);
  if (lowered.compare(0, key.size(), key) != 0) return std::nullopt;
  std::string_view rest = std::string_view(lowered).substr(key.size());
  std::size_t i = 0;
  while (i < rest.size() && (rest[i] == ' ' || rest[i] == '\t')) ++i;
  if (i == rest.size()) return std::string();
  if (rest[i] != ':') return std::nullopt;
  // Return the original-case remainder; offsets match since only case changed.
  const std::string trimmed = trim(line);
  return trim(std::string_view(trimmed).substr(key.size() + i + 1));
}

}  // namespace

std::optional<std::string> extract_primary_diagnosis(const RawNote& raw,
                                                     const DiagnosisRules& rules) {
  const std::vector<std::string> lines = split_lines(raw.text);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    for (const auto& header : rules.headers) {
      auto rest = match_header(lines[l], header);
      if (!rest) continue;
      if (!rest->empty()) return first_item(*rest, rules.delimiters);
      for (std::size_t next = l + 1; next < lines.size(); ++next) {
        if (trim(lines[next]).empty()) continue;
        return first_item(lines[next], rules.delimiters);
      }
      return std::nullopt;
    }
  }
  for (const auto& header : rules.headers) {
    for (const auto& [name, body] : raw.sections) {
      if (normalize_label(name) != normalize_label(header)) continue;
      for (const auto& line : split_lines(body)) {
        if (trim(line).empty()) continue;
        return first_item(line, rules.delimiters);
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- aliases

void AliasMap::add_group(std::string_view canonical, const std::vector<std::string>& aliases) {
  const std::string key = normalize_label(canonical);
  require(!key.empty(), ErrorCode::InvalidArgument, "alias group needs a canonical name");
  std::size_t group;
  if (auto it = lookup_.find(key); it != lookup_.end()) {
    group = it->second;
    if (groups_[group].canonical != key) {
      fail(ErrorCode::InvalidArgument,
           "canonical name '" + key + "' is already an alias of '" + groups_[group].canonical + "'");
    }
  } else {
    group = groups_.size();
    groups_.push_back({key, {key}});
    lookup_.emplace(key, group);
  }
  for (const auto& alias : aliases) {
    const std::string a = normalize_label(alias);
    if (a.empty()) continue;
    if (auto it = lookup_.find(a); it != lookup_.end()) {
      if (it->second != group) {
        fail(ErrorCode::InvalidArgument, "alias '" + a + "' belongs to both '" +
                                             groups_[it->second].canonical + "' and '" + key +
                                             "'");
      }
      continue;
    }
    lookup_.emplace(a, group);
    groups_[group].aliases.push_back(a);
  }
}

std::string AliasMap::resolve(std::string_view label) const {
  auto it = lookup_.find(normalize_label(label));
  if (it == lookup_.end()) return std::string(label);
  return groups_[it->second].canonical;
}

AliasMap AliasMap::parse(std::string_view text) {
  AliasMap map;
  for (const auto& line : split_lines(text)) {
    if (trim(line).empty() || trim(line).front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    const std::string canonical = fields.front();
    fields.erase(fields.begin());
    map.add_group(canonical, fields);
  }
  return map;
}

AliasMap AliasMap::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open alias map " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string resolve_alias(std::string_view raw_label, const AliasMap& map) {
  return map.resolve(raw_label);
}

// ---------------------------------------------------------------- corpus shaping

std::size_t nearest_rank(std::vector<std::size_t> values, std::uint32_t percent) {
  require(!values.empty(), ErrorCode::EmptyInput, "percentile of an empty set");
  require(percent >= 1 && percent <= 100, ErrorCode::InvalidArgument,
          "percentile must lie in [1, 100]");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const std::size_t rank = (percent * n + 99) / 100;  // ceil(p * n / 100), 1-based
  return values[std::max<std::size_t>(rank, 1) - 1];
}

std::size_t compute_truncation_length(const std::vector<Document>& corpus) {
  require(!corpus.empty(), ErrorCode::EmptyInput, "cannot compute truncation length of an empty corpus");
  std::vector<std::size_t> lengths;
  lengths.reserve(corpus.size());
  for (const auto& doc : corpus) lengths.push_back(doc.tokens.size());
  return nearest_rank(std::move(lengths), 90);
}

Document truncate(Document doc, std::size_t max_length) {
  require(max_length >= 1, ErrorCode::InvalidArgument, "truncation length must be >= 1");
  if (doc.tokens.size() > max_length) doc.tokens.resize(max_length);
  return doc;
}

LabelFilterResult filter_top_k_labels(const std::vector<Document>& corpus, std::size_t k) {
  require(k >= 1, ErrorCode::InvalidArgument, "k must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& doc : corpus) {
    if (!doc.label) fail(ErrorCode::InvalidArgument, "document " + doc.id + " has no label");
    ++freq[*doc.label];
  }
  if (freq.size() < k) {
    fail(ErrorCode::InvalidArgument, "only " + std::to_string(freq.size()) +
                                         " distinct labels, fewer than k=" + std::to_string(k));
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  ranked.resize(k);

  LabelFilterResult result;
  std::unordered_set<std::string> keep;
  for (auto& [label, count] : ranked) {
    keep.insert(label);
    result.labels.push_back(label);
    result.counts.push_back(count);
  }
  for (const auto& doc : corpus) {
    if (keep.count(*doc.label)) result.corpus.push_back(doc);
  }
  return result;
}

CorpusSplit split_dataset(const std::vector<Document>& corpus, std::uint64_t seed,
                          SplitRatios ratios) {
  if (!(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0) ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    fail(ErrorCode::InvalidArgument, "split ratios must be positive and sum to 1");
  }
  const std::size_t total = corpus.size();
  // The epsilon absorbs representation error, e.g. 0.7 * 13140.
  const auto cut1 = static_cast<std::size_t>(std::floor(ratios.train * total + 1e-9));
  const auto cut2 =
      static_cast<std::size_t>(std::floor((ratios.train + ratios.validation) * total + 1e-9));
  if (cut1 == 0 || cut2 <= cut1 || cut2 >= total) {
    fail(ErrorCode::InvalidArgument,
         "a corpus of " + std::to_string(total) + " documents leaves an empty split");
  }
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  Rng rng(seed);
  shuffle(std::span<std::size_t>(order), rng);

  CorpusSplit split;
  split.seed = seed;
  split.ratios = ratios;
  for (std::size_t i = 0; i < total; ++i) {
    auto& target = i < cut1 ? split.train : (i < cut2 ? split.validation : split.test);
    target.push_back(corpus[order[i]]);
  }
  return split;
}

Document preprocess_note(const RawNote& raw, const AliasMap& aliases,
                         const std::vector<std::string>& admission_sections,
                         const DiagnosisRules& rules) {
  Document doc;
  doc.id = raw.id;
  doc.tokens = split_tokens(clean_note(raw, admission_sections));
  std::optional<std::string> label =
      raw.label ? std::optional<std::string>(normalize_label(*raw.label))
                : extract_primary_diagnosis(raw, rules);
  if (label && !label->empty()) doc.label = aliases.resolve(*label);
  return doc;
}

}  // namespace notedx
