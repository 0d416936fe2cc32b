#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "notedx/random.hpp"
#include "notedx/tensor.hpp"
#include "notedx/textprep.hpp"
#include "notedx/vocabulary.hpp"

namespace notedx::baselines {

/// Row-sparse T x V matrix; each row holds (column, value) sorted by column.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> entries;

  Tensor to_dense() const;
};

// ---------------------------------------------------------------- tf-idf

/// Column j corresponds to vocabulary index j + 2 (padding and unknown are
/// not features).
struct TfidfModel {
  Vocabulary vocab;
  std::vector<std::uint64_t> document_frequency;
  std::vector<double> idf;
  std::size_t documents = 0;

  std::size_t features() const { return idf.size(); }
};

/// idf(w) = ln((1 + T) / (1 + df(w))) + 1 over the fitting corpus.
TfidfModel fit_tfidf(const std::vector<Document>& corpus, Vocabulary vocab);
/// Entry (d, w) = raw count of w in d times idf(w); out-of-vocabulary words are dropped.
SparseMatrix transform(const TfidfModel& model, const std::vector<Document>& corpus);
SparseMatrix tfidf_features(const std::vector<Document>& corpus, const Vocabulary& vocab);

// ---------------------------------------------------------------- PCA

struct PcaModel {
  std::vector<double> mean;        // V
  Tensor components;               // V' x V, orthonormal rows
  std::vector<double> explained_variance;  // V', non-increasing

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return explained_variance.size(); }
};

/// Top eigenvectors of the sample covariance of the rows of `data`.
PcaModel fit_pca(const Tensor& data, std::size_t components);
PcaModel fit_pca(const SparseMatrix& data, std::size_t components);
Tensor transform(const PcaModel& pca, const Tensor& data);
Tensor transform(const PcaModel& pca, const SparseMatrix& data);
Tensor inverse_transform(const PcaModel& pca, const Tensor& projected);

// ---------------------------------------------------------------- logistic regression

struct LogRegOptions {
  double l2 = 1e-4;
  std::size_t max_iterations = 2000;
  double tolerance = 1e-5;
};

struct LogRegModel {
  Tensor weights;  // K x D
  Tensor bias;     // K
  std::size_t iterations = 0;
  double gradient_norm = 0;
  bool converged = false;

  std::size_t classes() const { return bias.size(); }
};

/// Mean multinomial cross-entropy plus (l2 / 2) ||W||^2; bias is not penalized.
double logreg_objective(const LogRegModel& model, const Tensor& features,
                        const std::vector<std::size_t>& labels, double l2,
                        LogRegModel* gradient = nullptr);

/// Gradient descent with Barzilai-Borwein step sizes and a non-monotone
/// Armijo safeguard; stops when the gradient norm drops below tolerance.
LogRegModel train_logreg(const Tensor& features, const std::vector<std::size_t>& labels,
                         std::size_t classes, LogRegOptions options = {});
Tensor predict_proba(const LogRegModel& model, const Tensor& features);

// ---------------------------------------------------------------- MLP

struct MlpOptions {
  std::vector<std::size_t> hidden{100, 10};
  double learning_rate = 1e-3;
  std::size_t batch_size = 200;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 1;
};

struct MlpModel {
  std::vector<Tensor> weights;  // layer l: out x in
  std::vector<Tensor> biases;
  std::size_t epochs_run = 0;

  std::vector<Tensor*> parameters();
};

MlpModel init_mlp(std::size_t inputs, std::size_t classes, const MlpOptions& options);

/// Mean cross-entropy over the rows; fills `grads` (same layout as the
/// model parameters) when given.
double mlp_loss(const MlpModel& model, const Tensor& features,
                const std::vector<std::size_t>& labels, std::vector<Tensor>* grads = nullptr);

/// ReLU hidden layers, softmax output, Adam, early stopping on a held-out
/// slice of the training rows.
MlpModel train_mlp(const Tensor& features, const std::vector<std::size_t>& labels,
                   std::size_t classes, const MlpOptions& options = {});
Tensor predict_proba(const MlpModel& model, const Tensor& features);

std::vector<std::size_t> argmax_rows(const Tensor& probs);

}  // namespace notedx::baselines
