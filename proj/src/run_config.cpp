#include "notedx/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "notedx/corpus_io.hpp"
#include "notedx/error.hpp"

namespace notedx {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    fail(ErrorCode::Config, key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(out)) {
    fail(ErrorCode::Config, key + ": expected a number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  fail(ErrorCode::Config, key + ": expected true or false, got '" + value + "'");
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }
template <typename T>
  requires std::is_integral_v<T>
std::string fmt(T v) {
  return std::to_string(v);
}

std::string format_filters(const std::vector<cnn::FilterSpec>& filters) {
  std::vector<std::string> parts;
  for (const auto& f : filters) parts.push_back(std::to_string(f.height) + "x" + std::to_string(f.count));
  return join(parts);
}

std::vector<cnn::FilterSpec> parse_filters(const std::string& key, const std::string& value) {
  std::vector<cnn::FilterSpec> out;
  for (const auto& part : split_list(value)) {
    const auto x = part.find('x');
    if (x == std::string::npos) fail(ErrorCode::Config, key + ": expected HxF items, got '" + part + "'");
    out.push_back({parse_unsigned<std::size_t>(key, part.substr(0, x)),
                   parse_unsigned<std::size_t>(key, part.substr(x + 1))});
  }
  if (out.empty()) fail(ErrorCode::Config, key + ": at least one filter spec is required");
  return out;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
};

#define NDX_SIZE(member)                                                                        \
  Field {                                                                                       \
    [](const RunConfig& c) { return fmt(c.member); },                                           \
        [](RunConfig& c, const std::string& k, const std::string& v) {                          \
          c.member = parse_unsigned<std::remove_cvref_t<decltype(c.member)>>(k, v);             \
        }                                                                                       \
  }
#define NDX_DOUBLE(member)                                                                      \
  Field {                                                                                       \
    [](const RunConfig& c) { return fmt(c.member); },                                           \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); } \
  }
#define NDX_BOOL(member)                                                                        \
  Field {                                                                                       \
    [](const RunConfig& c) { return fmt(c.member); },                                           \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_bool(k, v); } \
  }
#define NDX_STRING(member)                                                                      \
  Field {                                                                                       \
    [](const RunConfig& c) { return c.member; },                                                \
        [](RunConfig& c, const std::string&, const std::string& v) { c.member = v; }            \
  }
#define NDX_LIST(member)                                                                        \
  Field {                                                                                       \
    [](const RunConfig& c) { return join(c.member); },                                          \
        [](RunConfig& c, const std::string&, const std::string& v) { c.member = split_list(v); } \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"corpus", NDX_STRING(corpus)},
      {"aliases", NDX_STRING(aliases)},
      {"sections", NDX_LIST(sections)},
      {"top_k", NDX_SIZE(top_k)},
      {"truncate", NDX_BOOL(truncate)},
      {"split_train", NDX_DOUBLE(ratios.train)},
      {"split_validation", NDX_DOUBLE(ratios.validation)},
      {"split_test", NDX_DOUBLE(ratios.test)},
      {"seeds", NDX_SIZE(seeds)},
      {"first_seed", NDX_SIZE(first_seed)},
      {"deterministic", NDX_BOOL(deterministic)},
      {"workers", NDX_SIZE(workers)},
      {"pretrain", NDX_BOOL(pretrain)},
      {"embed_dim", NDX_SIZE(cnn.embed_dim)},
      {"min_count", NDX_SIZE(skipgram.min_count)},
      {"sg_window", NDX_SIZE(skipgram.window)},
      {"sg_negatives", NDX_SIZE(skipgram.negatives)},
      {"sg_epochs", NDX_SIZE(skipgram.epochs)},
      {"sg_learning_rate", NDX_DOUBLE(skipgram.learning_rate)},
      {"sg_subsample", NDX_DOUBLE(skipgram.subsample)},
      {"sg_min_ngram", NDX_SIZE(skipgram.min_ngram)},
      {"sg_max_ngram", NDX_SIZE(skipgram.max_ngram)},
      {"sg_buckets", NDX_SIZE(skipgram.buckets)},
      {"sg_seed", NDX_SIZE(skipgram.seed)},
      {"cnn_filters",
       Field{[](const RunConfig& c) { return format_filters(c.cnn.filters); },
             [](RunConfig& c, const std::string& k, const std::string& v) { c.cnn.filters = parse_filters(k, v); }}},
      {"cnn_keep_prob", NDX_DOUBLE(cnn.keep_prob)},
      {"cnn_learning_rate", NDX_DOUBLE(cnn.learning_rate)},
      {"cnn_batch_size", NDX_SIZE(cnn.batch_size)},
      {"cnn_max_epochs", NDX_SIZE(cnn.max_epochs)},
      {"cnn_patience", NDX_SIZE(cnn.patience)},
      {"cnn_fine_tune", NDX_BOOL(cnn.fine_tune_embeddings)},
      {"cnn_max_length", NDX_SIZE(cnn.max_length)},
      {"cnn_activation",
       Field{[](const RunConfig& c) {
               return std::string(c.cnn.activation == nn::Activation::Relu ? "relu" : "identity");
             },
             [](RunConfig& c, const std::string& k, const std::string& v) {
               if (v == "relu") {
                 c.cnn.activation = nn::Activation::Relu;
               } else if (v == "identity") {
                 c.cnn.activation = nn::Activation::Identity;
               } else {
                 fail(ErrorCode::Config, k + ": expected relu or identity, got '" + v + "'");
               }
             }}},
      {"baselines", NDX_LIST(baselines)},
      {"pca_dim", NDX_SIZE(baseline.pca_dim)},
      {"lr_l2", NDX_DOUBLE(baseline.logreg.l2)},
      {"lr_max_iterations", NDX_SIZE(baseline.logreg.max_iterations)},
      {"lr_tolerance", NDX_DOUBLE(baseline.logreg.tolerance)},
      {"mlp_hidden",
       Field{[](const RunConfig& c) {
               std::vector<std::string> parts;
               for (auto h : c.baseline.mlp.hidden) parts.push_back(std::to_string(h));
               return join(parts);
             },
             [](RunConfig& c, const std::string& k, const std::string& v) {
               c.baseline.mlp.hidden.clear();
               for (const auto& part : split_list(v)) {
                 c.baseline.mlp.hidden.push_back(parse_unsigned<std::size_t>(k, part));
               }
             }}},
      {"mlp_learning_rate", NDX_DOUBLE(baseline.mlp.learning_rate)},
      {"mlp_batch_size", NDX_SIZE(baseline.mlp.batch_size)},
      {"mlp_max_epochs", NDX_SIZE(baseline.mlp.max_epochs)},
      {"mlp_patience", NDX_SIZE(baseline.mlp.patience)},
      {"mlp_holdout", NDX_DOUBLE(baseline.mlp.holdout_fraction)},
      {"compare_metric", NDX_STRING(compare_metric)},
      {"visualize_per_size", NDX_SIZE(visualize_per_size)},
      {"visualize_top", NDX_SIZE(visualize_top)},
      {"visualize_seed", NDX_SIZE(visualize_seed)},
  };
  return table;
}

#undef NDX_SIZE
#undef NDX_DOUBLE
#undef NDX_BOOL
#undef NDX_STRING
#undef NDX_LIST

}  // namespace

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& [name, field] : fields()) k.push_back(name);
    return k;
  }();
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) fail(ErrorCode::Config, "unknown config key '" + key + "'");
  it->second.set(*this, key, value);
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    const std::string where = "line " + std::to_string(number) + ": ";
    if (eq == std::string::npos) fail(ErrorCode::Config, where + "expected key=value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!seen.insert(key).second) fail(ErrorCode::Config, where + "duplicate key '" + key + "'");
    try {
      config.set(key, value);
    } catch (const Error& e) {
      fail(ErrorCode::Config, where + e.what());
    }
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + "=" + field.get(*this) + "\n";
  return out;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

void RunConfig::validate() const {
  const double sum = ratios.train + ratios.validation + ratios.test;
  require(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0 && std::abs(sum - 1.0) <= 1e-9,
          ErrorCode::Config, "split ratios must be positive and sum to 1");
  require(seeds >= 1, ErrorCode::Config, "seeds must be at least 1");
  require(top_k >= 1, ErrorCode::Config, "top_k must be at least 1");
  require(skipgram.window >= 1 && skipgram.negatives >= 1, ErrorCode::Config,
          "skip-gram window and negatives must be at least 1");
  require(skipgram.min_ngram >= 1 && skipgram.min_ngram <= skipgram.max_ngram && skipgram.buckets >= 1,
          ErrorCode::Config, "invalid subword n-gram settings");
  require(skipgram.min_count >= 1, ErrorCode::Config, "min_count must be at least 1");
  for (const auto& name : baselines) experiment::parse_baseline(name);
  require(baseline.pca_dim >= 1, ErrorCode::Config, "pca_dim must be at least 1");
  require(!baseline.mlp.hidden.empty(), ErrorCode::Config, "mlp_hidden needs at least one layer");
  require(baseline.mlp.holdout_fraction >= 0 && baseline.mlp.holdout_fraction < 1, ErrorCode::Config,
          "mlp_holdout must lie in [0, 1)");
  cnn_config().validate();
}

SkipgramConfig RunConfig::skipgram_config() const {
  SkipgramConfig c = skipgram;
  c.dim = cnn.embed_dim;
  c.deterministic = deterministic;
  c.threads = deterministic ? 1 : std::max<std::size_t>(1, workers);
  return c;
}

cnn::CnnConfig RunConfig::cnn_config() const {
  cnn::CnnConfig c = cnn;
  c.min_count = skipgram.min_count;
  c.deterministic = deterministic;
  c.workers = deterministic ? 1 : std::max<std::size_t>(1, workers);
  return c;
}

experiment::ExperimentOptions RunConfig::experiment_options() const {
  experiment::ExperimentOptions o;
  o.seeds = seeds;
  o.first_seed = first_seed;
  o.ratios = ratios;
  return o;
}

}  // namespace notedx
