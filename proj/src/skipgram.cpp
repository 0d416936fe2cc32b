#include "notedx/skipgram.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "notedx/random.hpp"

namespace notedx {

namespace {

constexpr char kMagic[5] = "NDXE";
constexpr std::uint32_t kVersion = 1;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Four fixed partial sums let the compiler vectorize without changing the
// result between runs.
double dot(const double* __restrict a, const double* __restrict b, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc[0] += a[i] * b[i];
    acc[1] += a[i + 1] * b[i + 1];
    acc[2] += a[i + 2] * b[i + 2];
    acc[3] += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) acc[0] += a[i] * b[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void axpy(double alpha, const double* __restrict x, double* __restrict y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

std::uint32_t fnv1a(std::string_view s) {
  std::uint32_t h = 2166136261u;
  for (char c : s) {
    h ^= static_cast<std::uint32_t>(static_cast<unsigned char>(c));
    h *= 16777619u;
  }
  return h;
}

std::vector<std::uint32_t> subword_buckets(std::string_view word, std::size_t min_n,
                                           std::size_t max_n, std::uint32_t buckets) {
  std::vector<std::uint32_t> out;
  if (word.empty() || buckets == 0) return out;
  const std::string bounded = "<" + std::string(word) + ">";
  // Byte offsets of UTF-8 character starts, plus the end.
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < bounded.size(); ++i) {
    if ((static_cast<unsigned char>(bounded[i]) & 0xC0) != 0x80) starts.push_back(i);
  }
  const std::size_t chars = starts.size();
  starts.push_back(bounded.size());
  for (std::size_t i = 0; i < chars; ++i) {
    for (std::size_t n = min_n; n <= max_n && i + n <= chars; ++n) {
      const std::string_view gram(bounded.data() + starts[i], starts[i + n] - starts[i]);
      out.push_back(fnv1a(gram) % buckets);
    }
  }
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double ab = dot(a.data(), b.data(), a.size());
  const double aa = dot(a.data(), a.data(), a.size());
  const double bb = dot(b.data(), b.data(), b.size());
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

// ---------------------------------------------------------------- store

EmbeddingStore::EmbeddingStore(Vocabulary vocab, const SkipgramConfig& config)
    : vocab_(std::move(vocab)),
      dim_(config.dim),
      min_n_(config.min_ngram),
      max_n_(config.max_ngram),
      buckets_(config.buckets),
      seed_(config.seed) {
  require(dim_ >= 2, ErrorCode::InvalidArgument, "embedding dimension must be >= 2");
  require(min_n_ >= 1 && min_n_ <= max_n_, ErrorCode::InvalidArgument, "bad n-gram range");
  const std::size_t v = vocab_.size();
  input_ = Tensor({v, dim_});
  output_ = Tensor({v, dim_});
  Rng rng(mix_seed(seed_, 0x1a2b));
  const double bound = 1.0 / static_cast<double>(dim_);
  for (std::size_t w = 0; w < v; ++w) {
    if (static_cast<std::int32_t>(w) == Vocabulary::kPad) continue;
    for (std::size_t e = 0; e < dim_; ++e) input_(w, e) = uniform(rng, -bound, bound);
  }
  materialize_word_buckets();
  recompose();
}

void EmbeddingStore::initial_bucket_vector(std::uint32_t bucket, std::span<double> out) const {
  Rng rng(mix_seed(seed_ ^ 0x5bd1e995ULL, bucket));
  const double bound = 1.0 / static_cast<double>(dim_);
  for (double& x : out) x = uniform(rng, -bound, bound);
}

void EmbeddingStore::materialize_word_buckets() {
  word_ngrams_.assign(vocab_.size(), {});
  for (std::size_t w = 0; w < vocab_.size(); ++w) {
    if (static_cast<std::int32_t>(w) == Vocabulary::kPad) continue;
    for (std::uint32_t b : subword_buckets(vocab_.words()[w], min_n_, max_n_, buckets_)) {
      auto [it, inserted] = bucket_row_.try_emplace(b, static_cast<std::uint32_t>(bucket_row_.size()));
      if (inserted) {
        ngram_rows_.resize(ngram_rows_.size() + dim_);
        initial_bucket_vector(b, std::span<double>(ngram_rows_).last(dim_));
      }
      word_ngrams_[w].push_back(it->second);
    }
  }
}

void EmbeddingStore::compose(std::int32_t w, std::span<double> out) const {
  const auto idx = static_cast<std::size_t>(w);
  std::fill(out.begin(), out.end(), 0.0);
  if (w == Vocabulary::kPad) return;
  const auto& rows = word_ngrams_[idx];
  if (!rows.empty()) {
    for (std::uint32_t r : rows) {
      const double* g = ngram_rows_.data() + static_cast<std::size_t>(r) * dim_;
      for (std::size_t e = 0; e < dim_; ++e) out[e] += g[e];
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (double& x : out) x *= inv;
  }
  for (std::size_t e = 0; e < dim_; ++e) out[e] += input_(idx, e);
}

void EmbeddingStore::recompose() {
  composed_ = Tensor({vocab_.size(), dim_});
  for (std::size_t w = 0; w < vocab_.size(); ++w) {
    compose(static_cast<std::int32_t>(w), composed_.row(w));
  }
}

std::vector<double> EmbeddingStore::embed(std::string_view word) const {
  std::vector<double> out(dim_, 0.0);
  if (word == Vocabulary::kPadToken) return out;
  if (auto w = vocab_.find(word)) {
    auto row = composed_.row(static_cast<std::size_t>(*w));
    std::copy(row.begin(), row.end(), out.begin());
    return out;
  }
  const auto grams = subword_buckets(word, min_n_, max_n_, buckets_);
  if (grams.empty()) return out;
  std::vector<double> scratch(dim_);
  for (std::uint32_t b : grams) {
    if (auto it = bucket_row_.find(b); it != bucket_row_.end()) {
      const double* g = ngram_rows_.data() + static_cast<std::size_t>(it->second) * dim_;
      for (std::size_t e = 0; e < dim_; ++e) out[e] += g[e];
    } else {
      initial_bucket_vector(b, scratch);
      for (std::size_t e = 0; e < dim_; ++e) out[e] += scratch[e];
    }
  }
  const double inv = 1.0 / static_cast<double>(grams.size());
  for (double& x : out) x *= inv;
  return out;
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  io::BinaryWriter w(out);
  io::write_header(w, kMagic, kVersion);
  w.put<std::uint64_t>(dim_);
  w.put<std::uint64_t>(min_n_);
  w.put<std::uint64_t>(max_n_);
  w.put<std::uint32_t>(buckets_);
  w.put<std::uint64_t>(seed_);
  vocab_.write(w);
  w.put_bytes(input_.data(), input_.size() * sizeof(double));
  w.put_bytes(output_.data(), output_.size() * sizeof(double));
  std::map<std::uint32_t, std::uint32_t> ordered(bucket_row_.begin(), bucket_row_.end());
  w.put<std::uint64_t>(ordered.size());
  for (const auto& [bucket, row] : ordered) {
    w.put<std::uint32_t>(bucket);
    w.put_bytes(ngram_rows_.data() + static_cast<std::size_t>(row) * dim_, dim_ * sizeof(double));
  }
  if (!out) fail(ErrorCode::Io, "failed writing " + path.string());
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  io::BinaryReader r(in);
  io::read_header(r, kMagic, kVersion);
  EmbeddingStore s;
  s.dim_ = r.get<std::uint64_t>();
  s.min_n_ = r.get<std::uint64_t>();
  s.max_n_ = r.get<std::uint64_t>();
  s.buckets_ = r.get<std::uint32_t>();
  s.seed_ = r.get<std::uint64_t>();
  if (s.dim_ > (1u << 20)) fail(ErrorCode::CorruptFile, "implausible embedding dimension");
  s.vocab_ = Vocabulary::read(r);
  const std::size_t v = s.vocab_.size();
  s.input_ = Tensor({v, s.dim_});
  s.output_ = Tensor({v, s.dim_});
  r.get_bytes(s.input_.data(), s.input_.size() * sizeof(double));
  r.get_bytes(s.output_.data(), s.output_.size() * sizeof(double));
  const auto rows = r.get<std::uint64_t>();
  if (rows > s.buckets_) fail(ErrorCode::CorruptFile, "more bucket rows than buckets");
  s.ngram_rows_.resize(rows * s.dim_);
  for (std::uint64_t i = 0; i < rows; ++i) {
    const auto bucket = r.get<std::uint32_t>();
    s.bucket_row_[bucket] = static_cast<std::uint32_t>(i);
    r.get_bytes(s.ngram_rows_.data() + i * s.dim_, s.dim_ * sizeof(double));
  }
  // Word n-gram lists index into the loaded rows; buckets of vocabulary words
  // are always present in a saved store.
  s.word_ngrams_.assign(v, {});
  for (std::size_t w = 0; w < v; ++w) {
    if (static_cast<std::int32_t>(w) == Vocabulary::kPad) continue;
    for (std::uint32_t b : subword_buckets(s.vocab_.words()[w], s.min_n_, s.max_n_, s.buckets_)) {
      auto it = s.bucket_row_.find(b);
      if (it == s.bucket_row_.end()) fail(ErrorCode::CorruptFile, "missing bucket row for a word");
      s.word_ngrams_[w].push_back(it->second);
    }
  }
  s.recompose();
  return s;
}

void EmbeddingStore::save_text(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << vocab_.size() << ' ' << dim_ << '\n';
  out << std::setprecision(17);
  for (std::size_t w = 0; w < vocab_.size(); ++w) {
    out << vocab_.words()[w];
    for (std::size_t e = 0; e < dim_; ++e) out << ' ' << composed_(w, e);
    out << '\n';
  }
}

bool EmbeddingStore::bitwise_equal(const EmbeddingStore& other) const {
  if (dim_ != other.dim_ || min_n_ != other.min_n_ || max_n_ != other.max_n_ ||
      buckets_ != other.buckets_ || seed_ != other.seed_ || !(vocab_ == other.vocab_)) {
    return false;
  }
  auto same_bits = [](std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  };
  if (!same_bits(input_.values(), other.input_.values()) ||
      !same_bits(output_.values(), other.output_.values()) ||
      bucket_row_.size() != other.bucket_row_.size()) {
    return false;
  }
  for (const auto& [bucket, row] : bucket_row_) {
    auto it = other.bucket_row_.find(bucket);
    if (it == other.bucket_row_.end()) return false;
    std::span<const double> a(ngram_rows_.data() + std::size_t{row} * dim_, dim_);
    std::span<const double> b(other.ngram_rows_.data() + std::size_t{it->second} * dim_, dim_);
    if (!same_bits(a, b)) return false;
  }
  return true;
}

// ---------------------------------------------------------------- training

class SkipgramTrainer {
 public:
  void finish() { store_.recompose(); }
  SkipgramTrainer(EmbeddingStore& store, const SkipgramConfig& config,
                  const std::vector<std::vector<std::int32_t>>& sentences, std::uint64_t tokens)
      : store_(store), config_(config), sentences_(sentences), total_tokens_(tokens) {
    const Vocabulary& vocab = store.vocab_;
    std::uint64_t total = 0;
    for (std::size_t w = 2; w < vocab.size(); ++w) total += vocab.counts()[w];
    keep_prob_.assign(vocab.size(), 1.0);
    double mass = 0.0;
    noise_cdf_.assign(vocab.size(), 0.0);
    for (std::size_t w = 2; w < vocab.size(); ++w) {
      const double f = static_cast<double>(vocab.counts()[w]) / static_cast<double>(total);
      if (config.subsample > 0) {
        const double r = config.subsample / f;
        keep_prob_[w] = std::min(1.0, std::sqrt(r) + r);
      }
      mass += std::pow(static_cast<double>(vocab.counts()[w]), 0.75);
      noise_cdf_[w] = mass;
    }
    for (double& c : noise_cdf_) c /= mass;
  }

  double run_epoch(std::size_t epoch, std::uint64_t& pairs) {
    const std::size_t threads = config_.deterministic ? 1 : std::max<std::size_t>(1, config_.threads);
    std::vector<double> loss(threads, 0.0);
    std::vector<std::uint64_t> count(threads, 0);
    auto work = [&](std::size_t t) {
      Rng rng(mix_seed(config_.seed, epoch * 1000003ULL + t));
      for (std::size_t s = t; s < sentences_.size(); s += threads) {
        train_sentence(sentences_[s], rng, loss[t], count[t]);
      }
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }
    double total_loss = 0.0;
    std::uint64_t total_pairs = 0;
    for (std::size_t t = 0; t < threads; ++t) {
      total_loss += loss[t];
      total_pairs += count[t];
    }
    pairs += total_pairs;
    return total_pairs ? total_loss / static_cast<double>(total_pairs) : 0.0;
  }

 private:
  std::int32_t sample_negative(Rng& rng, std::int32_t target) const {
    for (;;) {
      const double u = uniform01(rng);
      auto it = std::upper_bound(noise_cdf_.begin() + 2, noise_cdf_.end(), u);
      if (it == noise_cdf_.end()) --it;
      const auto w = static_cast<std::int32_t>(it - noise_cdf_.begin());
      if (w != target) return w;
    }
  }

  double learning_rate() const {
    const double budget = static_cast<double>(total_tokens_ * config_.epochs);
    const double progress = static_cast<double>(processed_.load(std::memory_order_relaxed)) / budget;
    return config_.learning_rate * std::max(0.0, 1.0 - progress);
  }

  /// Logistic step on one context row; accumulates into grad_h, returns loss.
  double logistic_step(const double* h, std::int32_t target, bool positive, double lr,
                       double* grad_h) {
    const std::size_t dim = store_.dim_;
    double* u = store_.output_.data() + static_cast<std::size_t>(target) * dim;
    const double score = sigmoid(dot(u, h, dim));
    const double label = positive ? 1.0 : 0.0;
    const double alpha = lr * (label - score);
    axpy(alpha, u, grad_h, dim);
    axpy(alpha, h, u, dim);
    const double p = positive ? score : 1.0 - score;
    return -std::log(std::max(p, 1e-300));
  }

  void train_sentence(const std::vector<std::int32_t>& raw, Rng& rng, double& loss,
                      std::uint64_t& count) {
    std::vector<std::int32_t> line;
    line.reserve(raw.size());
    for (std::int32_t w : raw) {
      if (uniform01(rng) < keep_prob_[static_cast<std::size_t>(w)]) line.push_back(w);
    }
    processed_.fetch_add(raw.size(), std::memory_order_relaxed);
    const double lr = learning_rate();
    const std::size_t dim = store_.dim_;
    std::vector<double> hidden(dim);
    std::vector<double> grad(dim);
    for (std::size_t pos = 0; pos < line.size(); ++pos) {
      const std::int32_t center = line[pos];
      const auto reach = static_cast<std::ptrdiff_t>(1 + uniform_index(rng, config_.window));
      store_.compose(center, hidden);
      std::fill(grad.begin(), grad.end(), 0.0);
      bool touched = false;
      for (std::ptrdiff_t c = -reach; c <= reach; ++c) {
        const auto ctx = static_cast<std::ptrdiff_t>(pos) + c;
        if (c == 0 || ctx < 0 || ctx >= static_cast<std::ptrdiff_t>(line.size())) continue;
        const std::int32_t target = line[static_cast<std::size_t>(ctx)];
        double pair_loss = logistic_step(hidden.data(), target, true, lr, grad.data());
        for (std::size_t n = 0; n < config_.negatives; ++n) {
          pair_loss += logistic_step(hidden.data(), sample_negative(rng, target), false, lr,
                                     grad.data());
        }
        loss += pair_loss;
        ++count;
        touched = true;
      }
      if (touched) apply_input_gradient(center, grad);
    }
  }

  /// h = own + mean(ngrams): own gets the full gradient, each n-gram 1/n of it.
  void apply_input_gradient(std::int32_t w, const std::vector<double>& grad) {
    const std::size_t dim = store_.dim_;
    double* own = store_.input_.data() + static_cast<std::size_t>(w) * dim;
    for (std::size_t e = 0; e < dim; ++e) own[e] += grad[e];
    const auto& rows = store_.word_ngrams_[static_cast<std::size_t>(w)];
    if (rows.empty()) return;
    const double share = 1.0 / static_cast<double>(rows.size());
    for (std::uint32_t r : rows) {
      double* g = store_.ngram_rows_.data() + static_cast<std::size_t>(r) * dim;
      for (std::size_t e = 0; e < dim; ++e) g[e] += share * grad[e];
    }
  }

  EmbeddingStore& store_;
  const SkipgramConfig& config_;
  const std::vector<std::vector<std::int32_t>>& sentences_;
  std::uint64_t total_tokens_;
  std::atomic<std::uint64_t> processed_{0};
  std::vector<double> keep_prob_;
  std::vector<double> noise_cdf_;
};

EmbeddingStore train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                              const SkipgramConfig& config, SkipgramReport* report) {
  require(!corpus.empty(), ErrorCode::EmptyInput, "skip-gram needs a nonempty corpus");
  return train_skipgram(corpus, Vocabulary::build(corpus, config.min_count), config, report);
}

EmbeddingStore train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                              const Vocabulary& vocab, const SkipgramConfig& config,
                              SkipgramReport* report) {
  require(config.dim >= 2, ErrorCode::InvalidArgument, "embedding dimension must be >= 2");
  require(config.window >= 1, ErrorCode::InvalidArgument, "context window must be >= 1");
  require(config.negatives >= 1, ErrorCode::InvalidArgument, "need at least one negative sample");
  require(!corpus.empty(), ErrorCode::EmptyInput, "skip-gram needs a nonempty corpus");
  require(vocab.size() >= 4, ErrorCode::EmptyInput,
          "skip-gram needs at least two vocabulary words besides padding and unknown");

  std::vector<std::vector<std::int32_t>> sentences;
  std::uint64_t tokens = 0;
  for (const auto& sentence : corpus) {
    std::vector<std::int32_t> ids;
    for (const auto& token : sentence) {
      if (auto w = vocab.find(token); w && *w >= 2) ids.push_back(*w);
    }
    tokens += ids.size();
    if (ids.size() >= 2) sentences.push_back(std::move(ids));
  }
  require(tokens > 0, ErrorCode::EmptyInput, "no corpus token is in the vocabulary");

  EmbeddingStore store(vocab, config);
  SkipgramTrainer trainer(store, config, sentences, tokens);
  SkipgramReport local;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    local.epoch_loss.push_back(trainer.run_epoch(epoch, local.pairs));
  }
  trainer.finish();
  if (report) *report = std::move(local);
  return store;
}

// ---------------------------------------------------------------- objective pieces

double negative_sampling_loss(std::span<const double> center, std::span<const double> positive,
                              std::span<const std::vector<double>> negatives) {
  double loss = -std::log(sigmoid(dot(positive.data(), center.data(), center.size())));
  for (const auto& n : negatives) {
    loss -= std::log(sigmoid(-dot(n.data(), center.data(), center.size())));
  }
  return loss;
}

NegativeSamplingGrad negative_sampling_gradient(std::span<const double> center,
                                                std::span<const double> positive,
                                                std::span<const std::vector<double>> negatives) {
  const std::size_t dim = center.size();
  NegativeSamplingGrad g{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0), {}};
  const double sp = sigmoid(dot(positive.data(), center.data(), dim));
  for (std::size_t e = 0; e < dim; ++e) {
    g.center[e] -= (1.0 - sp) * positive[e];
    g.positive[e] = -(1.0 - sp) * center[e];
  }
  for (const auto& n : negatives) {
    const double sn = sigmoid(dot(n.data(), center.data(), dim));
    std::vector<double> gn(dim);
    for (std::size_t e = 0; e < dim; ++e) {
      g.center[e] += sn * n[e];
      gn[e] = sn * center[e];
    }
    g.negatives.push_back(std::move(gn));
  }
  return g;
}

std::vector<double> exact_context_distribution(const EmbeddingStore& store, std::int32_t center) {
  const std::size_t v = store.vocabulary().size();
  require(center >= 0 && static_cast<std::size_t>(center) < v, ErrorCode::OutOfRange,
          "center word index out of range");
  const auto h = store.composed_vectors().row(static_cast<std::size_t>(center));
  std::vector<double> scores(v);
  for (std::size_t w = 0; w < v; ++w) {
    scores[w] = dot(store.context_vectors().row(w).data(), h.data(), store.dim());
  }
  const double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (double& s : scores) {
    s = std::exp(s - top);
    total += s;
  }
  for (double& s : scores) s /= total;
  return scores;
}

}  // namespace notedx
