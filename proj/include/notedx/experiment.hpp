#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "notedx/baselines.hpp"
#include "notedx/cnn.hpp"
#include "notedx/metrics.hpp"
#include "notedx/skipgram.hpp"
#include "notedx/textprep.hpp"

namespace notedx::experiment {

/// Distinct labels by descending frequency, ties lexicographic.
std::vector<std::string> label_order(const std::vector<Document>& corpus);
std::vector<std::vector<std::string>> token_lists(const std::vector<Document>& docs);

struct ExperimentOptions {
  std::size_t seeds = 5;
  /// Run i uses seed first_seed + i for its split and its model.
  std::uint64_t first_seed = 1;
  SplitRatios ratios{};
  /// Class order for models and reports; empty means label_order(corpus).
  std::vector<std::string> classes;

  std::vector<std::uint64_t> seed_list() const;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<cnn::Prediction> predictions;
  metrics::MetricsReport report;
};

struct CnnRun {
  SeedResult result;
  cnn::CnnModel model;
  std::vector<Document> test;
};

/// Split, build, train and evaluate on the test split once per seed.
std::vector<CnnRun> run_cnn(const std::vector<Document>& corpus, const cnn::CnnConfig& config,
                            const ExperimentOptions& options,
                            const EmbeddingStore* pretrained = nullptr,
                            const std::function<void(const CnnRun&)>& on_seed = {});

enum class BaselineKind { LogReg, Mlp };
std::string baseline_name(BaselineKind kind);
BaselineKind parse_baseline(const std::string& name);

struct BaselineOptions {
  std::size_t pca_dim = 256;
  std::size_t min_count = 2;
  baselines::LogRegOptions logreg{};
  baselines::MlpOptions mlp{};
};

/// Train-split tf-idf features reduced by a train-split PCA.
struct FeatureSet {
  Tensor train;
  Tensor test;
  std::vector<std::size_t> train_labels;
  std::vector<std::size_t> test_labels;
};

FeatureSet baseline_features(const CorpusSplit& split, const std::vector<std::string>& classes,
                             const BaselineOptions& options);

/// One result list per requested kind, in the order of `kinds`. Features are
/// computed once per seed and shared by the kinds.
std::vector<std::vector<SeedResult>> run_baselines(const std::vector<Document>& corpus,
                                                   const std::vector<BaselineKind>& kinds,
                                                   const BaselineOptions& baseline,
                                                   const ExperimentOptions& options);

SeedResult make_result(std::uint64_t seed, std::vector<cnn::Prediction> predictions,
                       const std::vector<std::string>& classes);

// ---------------------------------------------------------------- files

/// `{"id", "gold", "pred", "probs"}` per line.
std::string predictions_jsonl(const std::vector<cnn::Prediction>& predictions);
std::vector<cnn::Prediction> read_predictions(const std::filesystem::path& path);

/// Class order for a prediction file: label_order over its gold labels, with
/// predicted-only labels appended lexicographically.
std::vector<std::string> prediction_classes(const std::vector<cnn::Prediction>& predictions);

/// epoch,train_loss,validation_wf1,validation_accuracy
std::string history_csv(const cnn::CnnModel& model);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace notedx::experiment
