#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "notedx/adam.hpp"
#include "notedx/layers.hpp"
#include "notedx/skipgram.hpp"
#include "notedx/textprep.hpp"
#include "notedx/vocabulary.hpp"

namespace notedx::cnn {

struct FilterSpec {
  std::size_t height = 3;
  std::size_t count = 64;
  bool operator==(const FilterSpec&) const = default;
};

struct CnnConfig {
  std::size_t embed_dim = 128;
  std::vector<FilterSpec> filters{{3, 64}, {4, 64}, {5, 64}};
  double keep_prob = 0.5;
  double learning_rate = 1e-4;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  bool fine_tune_embeddings = true;
  nn::Activation activation = nn::Activation::Relu;
  /// Sequence length documents are padded/truncated to; 0 means "longest
  /// training document".
  std::size_t max_length = 0;
  std::size_t min_count = 2;
  std::uint64_t seed = 1;
  /// Worker threads for per-example gradients; 1 in deterministic mode.
  std::size_t workers = 1;
  bool deterministic = true;

  std::size_t total_filters() const;
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double validation_wf1 = 0;
  double validation_accuracy = 0;
};

/// Embedding layer, parallel filter banks, max-over-time pooling, dropout,
/// dense layer and softmax.
struct CnnModel {
  CnnConfig config;
  Vocabulary vocab;
  std::vector<std::string> classes;
  Tensor embedding;  // V x E, row 0 is padding and stays zero
  std::vector<nn::FilterBank> banks;
  Tensor dense_weights;  // K x sum(F)
  Tensor dense_bias;     // K
  std::vector<EpochRecord> history;
  double initial_train_loss = 0;
  std::size_t best_epoch = 0;

  std::size_t num_classes() const { return classes.size(); }
  std::size_t max_length() const { return config.max_length; }
  /// Parameter tensors in a fixed order: embedding, banks (weights, bias), dense.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t class_index(const std::string& label) const;
};

/// Builds an untrained model. With a pretrained store, each embedding row is
/// embed(store, word); otherwise rows are uniform(-0.05, 0.05).
CnnModel build_model(const CnnConfig& config, Vocabulary vocab, std::vector<std::string> classes,
                     const EmbeddingStore* pretrained = nullptr);

/// Token ids padded with kPad on the right (or truncated) to the model length.
std::vector<std::int32_t> encode_document(const CnnModel& model,
                                          const std::vector<std::string>& tokens);

/// Every intermediate of one forward pass, kept for backward().
struct ForwardPass {
  std::vector<std::int32_t> ids;
  Tensor embedded;  // L x E
  std::vector<nn::ConvOutput> conv;
  std::vector<nn::PoolOutput> pooled;
  Tensor features;  // sum(F)
  nn::DropoutOutput dropped;
  Tensor logits;
  Tensor probs;
};

ForwardPass forward(const CnnModel& model, std::vector<std::int32_t> ids, nn::Mode mode, Rng& rng);
/// Inference-mode class distribution for a tokenized document.
Tensor predict_proba(const CnnModel& model, const std::vector<std::string>& tokens);

/// Gradient buffers shaped like the model parameters.
struct CnnGradients {
  Tensor embedding;
  std::vector<nn::FilterBankGrad> banks;
  Tensor dense_weights;
  Tensor dense_bias;

  explicit CnnGradients(const CnnModel& model);
  void zero();
  void add(const CnnGradients& other);
  void scale(double factor);
  std::vector<const Tensor*> tensors() const;
};

/// Cross-entropy loss of the pass against class `label`; accumulates the
/// parameter gradients into `grads`.
double backward(const CnnModel& model, const ForwardPass& pass, std::size_t label,
                CnnGradients& grads);

struct Prediction {
  std::string id;
  std::string gold;
  std::string pred;
  std::vector<double> probs;
};

std::vector<Prediction> predict(const CnnModel& model, const std::vector<Document>& docs);

/// Trains with minibatch Adam, scoring weighted F1 on the validation split
/// after every epoch; returns the snapshot with the best validation score.
void train(CnnModel& model, const CorpusSplit& split);

/// Mean inference-mode loss over labelled documents.
double mean_loss(const CnnModel& model, const std::vector<Document>& docs);

void save_checkpoint(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_checkpoint(const std::filesystem::path& path);

/// Checkpoint format version written by this build.
inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace notedx::cnn
