#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "notedx/tensor.hpp"
#include "notedx/vocabulary.hpp"

namespace notedx {

struct SkipgramConfig {
  std::size_t dim = 128;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  /// Frequent-word subsampling threshold; <= 0 disables subsampling.
  double subsample = 1e-4;
  std::size_t min_count = 2;
  std::size_t min_ngram = 3;
  std::size_t max_ngram = 6;
  std::uint32_t buckets = 1u << 21;
  std::uint64_t seed = 1;
  /// Worker threads for hogwild updates; forced to 1 when deterministic.
  std::size_t threads = 1;
  bool deterministic = true;
};

/// Character n-grams of `<word>` hashed into [0, buckets).
std::vector<std::uint32_t> subword_buckets(std::string_view word, std::size_t min_n,
                                           std::size_t max_n, std::uint32_t buckets);
std::uint32_t fnv1a(std::string_view s);

/// Trained word vectors, context vectors and subword bucket vectors.
///
/// The bucket table is conceptually `buckets x dim`, but only buckets that
/// belong to vocabulary words are stored. Every other bucket reads as its
/// deterministic initial value, derived from the store seed and the bucket id,
/// so a query for any string is well defined without allocating 2^21 rows.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(Vocabulary vocab, const SkipgramConfig& config);

  std::size_t dim() const noexcept { return dim_; }
  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  std::size_t min_ngram() const noexcept { return min_n_; }
  std::size_t max_ngram() const noexcept { return max_n_; }
  std::uint32_t buckets() const noexcept { return buckets_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Own vector plus the mean of its n-gram vectors for vocabulary words,
  /// the n-gram mean for anything else, zeros for the padding token.
  std::vector<double> embed(std::string_view word) const;

  const Tensor& input_vectors() const noexcept { return input_; }
  const Tensor& context_vectors() const noexcept { return output_; }
  const Tensor& composed_vectors() const noexcept { return composed_; }

  /// Rows of the materialized bucket table, keyed by bucket id.
  const std::unordered_map<std::uint32_t, std::uint32_t>& bucket_rows() const noexcept {
    return bucket_row_;
  }

  void save(const std::filesystem::path& path) const;
  static EmbeddingStore load(const std::filesystem::path& path);
  /// `word v_1 ... v_E` per vocabulary word, preceded by a `V E` line.
  void save_text(const std::filesystem::path& path) const;

  bool bitwise_equal(const EmbeddingStore& other) const;

 private:
  friend class SkipgramTrainer;

  void initial_bucket_vector(std::uint32_t bucket, std::span<double> out) const;
  void materialize_word_buckets();
  void recompose();
  /// Composed input vector of vocabulary word `w`, written into `out`.
  void compose(std::int32_t w, std::span<double> out) const;

  Vocabulary vocab_;
  std::size_t dim_ = 0;
  std::size_t min_n_ = 3;
  std::size_t max_n_ = 6;
  std::uint32_t buckets_ = 1u << 21;
  std::uint64_t seed_ = 1;

  Tensor input_;     // V x E, own word vectors
  Tensor output_;    // V x E, context vectors
  Tensor composed_;  // V x E, cached embed() for vocabulary words
  std::vector<double> ngram_rows_;
  std::unordered_map<std::uint32_t, std::uint32_t> bucket_row_;
  std::vector<std::vector<std::uint32_t>> word_ngrams_;  // rows per vocabulary word
};

struct SkipgramReport {
  /// Mean negative-sampling loss per (center, context) pair, one per epoch.
  std::vector<double> epoch_loss;
  std::uint64_t pairs = 0;
};

/// Skip-gram with negative sampling over subword-composed input vectors.
EmbeddingStore train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                              const SkipgramConfig& config, SkipgramReport* report = nullptr);

/// Same, with a caller-supplied vocabulary.
EmbeddingStore train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                              const Vocabulary& vocab, const SkipgramConfig& config,
                              SkipgramReport* report = nullptr);

// ---------------------------------------------------------------- objective pieces

/// -log s(u_o . h) - sum_n log s(-u_n . h)
double negative_sampling_loss(std::span<const double> center, std::span<const double> positive,
                              std::span<const std::vector<double>> negatives);

struct NegativeSamplingGrad {
  std::vector<double> center;
  std::vector<double> positive;
  std::vector<std::vector<double>> negatives;
};

NegativeSamplingGrad negative_sampling_gradient(std::span<const double> center,
                                                std::span<const double> positive,
                                                std::span<const std::vector<double>> negatives);

/// Full softmax P(context | center) over the whole vocabulary, using the
/// composed input vector of `center` and every context vector. Only meant for
/// small vocabularies.
std::vector<double> exact_context_distribution(const EmbeddingStore& store, std::int32_t center);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace notedx
