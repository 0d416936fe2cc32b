#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

#include "notedx/baselines.hpp"

namespace notedx::baselines {

Tensor SparseMatrix::to_dense() const {
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (const auto& [c, v] : entries[r]) out(r, c) = v;
  }
  return out;
}

TfidfModel fit_tfidf(const std::vector<Document>& corpus, Vocabulary vocab) {
  require(vocab.size() >= 2, ErrorCode::InvalidArgument, "tf-idf needs a built vocabulary");
  TfidfModel m;
  m.vocab = std::move(vocab);
  const std::size_t features = m.vocab.size() - 2;
  m.document_frequency.assign(features, 0);
  m.documents = corpus.size();
  for (const auto& doc : corpus) {
    std::vector<bool> seen(features, false);
    for (const auto& token : doc.tokens) {
      auto id = m.vocab.find(token);
      if (!id || *id < 2) continue;
      const auto col = static_cast<std::size_t>(*id - 2);
      if (!seen[col]) {
        seen[col] = true;
        ++m.document_frequency[col];
      }
    }
  }
  m.idf.resize(features);
  const double t = static_cast<double>(m.documents);
  for (std::size_t j = 0; j < features; ++j) {
    m.idf[j] = std::log((1.0 + t) / (1.0 + static_cast<double>(m.document_frequency[j]))) + 1.0;
  }
  return m;
}

SparseMatrix transform(const TfidfModel& model, const std::vector<Document>& corpus) {
  SparseMatrix x;
  x.rows = corpus.size();
  x.cols = model.features();
  x.entries.resize(corpus.size());
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    std::map<std::uint32_t, std::uint64_t> counts;
    for (const auto& token : corpus[d].tokens) {
      auto id = model.vocab.find(token);
      if (id && *id >= 2) ++counts[static_cast<std::uint32_t>(*id - 2)];
    }
    auto& row = x.entries[d];
    row.reserve(counts.size());
    for (const auto& [col, count] : counts) {
      row.emplace_back(col, static_cast<double>(count) * model.idf[col]);
    }
  }
  return x;
}

SparseMatrix tfidf_features(const std::vector<Document>& corpus, const Vocabulary& vocab) {
  return transform(fit_tfidf(corpus, vocab), corpus);
}

// ---------------------------------------------------------------- PCA

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Flips each row so its largest-magnitude entry is positive.
void canonical_signs(Tensor& components) {
  const std::size_t k = components.dim(0);
  const std::size_t v = components.dim(1);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < v; ++j) {
      if (std::abs(components(i, j)) > std::abs(components(i, best))) best = j;
    }
    if (components(i, best) < 0) {
      for (std::size_t j = 0; j < v; ++j) components(i, j) = -components(i, j);
    }
  }
}

PcaModel from_covariance(const MatrixXd& cov, std::vector<double> mean, std::size_t k) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) fail(ErrorCode::InvalidArgument, "eigendecomposition failed");
  const std::size_t v = mean.size();
  PcaModel pca;
  pca.mean = std::move(mean);
  pca.components = Tensor({k, v});
  for (std::size_t i = 0; i < k; ++i) {
    const auto col = static_cast<Eigen::Index>(v - 1 - i);  // eigenvalues ascend
    pca.explained_variance.push_back(std::max(0.0, solver.eigenvalues()(col)));
    for (std::size_t j = 0; j < v; ++j) {
      pca.components(i, j) = solver.eigenvectors()(static_cast<Eigen::Index>(j), col);
    }
  }
  canonical_signs(pca.components);
  return pca;
}

/// For more features than rows: eigenvectors of the T x T Gram matrix of the
/// centered data map to covariance eigenvectors through X_c^T.
PcaModel from_gram(const MatrixXd& centered, std::vector<double> mean, std::size_t k) {
  const auto t = centered.rows();
  const MatrixXd gram = centered * centered.transpose() / static_cast<double>(t - 1);
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) fail(ErrorCode::InvalidArgument, "eigendecomposition failed");
  const std::size_t v = mean.size();
  PcaModel pca;
  pca.mean = std::move(mean);
  pca.components = Tensor({k, v});
  for (std::size_t i = 0; i < k; ++i) {
    const auto col = static_cast<Eigen::Index>(t - 1 - static_cast<Eigen::Index>(i));
    const double lambda = std::max(0.0, solver.eigenvalues()(col));
    pca.explained_variance.push_back(lambda);
    VectorXd dir = centered.transpose() * solver.eigenvectors().col(col);
    const double norm = dir.norm();
    if (norm > 0) dir /= norm;
    for (std::size_t j = 0; j < v; ++j) pca.components(i, j) = dir(static_cast<Eigen::Index>(j));
  }
  canonical_signs(pca.components);
  return pca;
}

void check_components(std::size_t k, std::size_t t, std::size_t v) {
  require(k >= 1, ErrorCode::InvalidArgument, "PCA needs at least one component");
  require(t >= 2, ErrorCode::InvalidArgument, "PCA needs at least two rows");
  if (k > std::min(t, v)) {
    fail(ErrorCode::InvalidArgument, "requested " + std::to_string(k) +
                                         " components but data is " + std::to_string(t) + " x " +
                                         std::to_string(v));
  }
}

}  // namespace

PcaModel fit_pca(const Tensor& data, std::size_t components) {
  require(data.rank() == 2, ErrorCode::ShapeMismatch, "PCA input must be T x V");
  const std::size_t t = data.dim(0);
  const std::size_t v = data.dim(1);
  check_components(components, t, v);
  MatrixXd x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v));
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t c = 0; c < v; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = data(r, c);
  }
  const VectorXd mu = x.colwise().mean();
  x.rowwise() -= mu.transpose();
  std::vector<double> mean(mu.data(), mu.data() + v);
  if (v <= t) {
    const MatrixXd cov = x.transpose() * x / static_cast<double>(t - 1);
    return from_covariance(cov, std::move(mean), components);
  }
  return from_gram(x, std::move(mean), components);
}

PcaModel fit_pca(const SparseMatrix& data, std::size_t components) {
  const std::size_t t = data.rows;
  const std::size_t v = data.cols;
  check_components(components, t, v);
  if (v > t) return fit_pca(data.to_dense(), components);
  // Covariance straight from the sparse rows: (X^T X - T mu mu^T) / (T - 1).
  VectorXd mu = VectorXd::Zero(static_cast<Eigen::Index>(v));
  MatrixXd xtx = MatrixXd::Zero(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v));
  for (const auto& row : data.entries) {
    for (const auto& [i, a] : row) {
      mu(i) += a;
      for (const auto& [j, b] : row) xtx(i, j) += a * b;
    }
  }
  mu /= static_cast<double>(t);
  const MatrixXd cov = (xtx - static_cast<double>(t) * mu * mu.transpose()) / static_cast<double>(t - 1);
  return from_covariance(cov, std::vector<double>(mu.data(), mu.data() + v), components);
}

Tensor transform(const PcaModel& pca, const Tensor& data) {
  require(data.rank() == 2 && data.dim(1) == pca.input_dim(), ErrorCode::ShapeMismatch,
          "PCA input width does not match the fitted model");
  const std::size_t t = data.dim(0);
  const std::size_t v = pca.input_dim();
  const std::size_t k = pca.output_dim();
  Tensor out({t, k});
  std::vector<double> centered(v);
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t j = 0; j < v; ++j) centered[j] = data(r, j) - pca.mean[j];
    for (std::size_t i = 0; i < k; ++i) {
      const double* comp = pca.components.data() + i * v;
      double acc = 0.0;
      for (std::size_t j = 0; j < v; ++j) acc += comp[j] * centered[j];
      out(r, i) = acc;
    }
  }
  return out;
}

Tensor transform(const PcaModel& pca, const SparseMatrix& data) {
  require(data.cols == pca.input_dim(), ErrorCode::ShapeMismatch,
          "PCA input width does not match the fitted model");
  const std::size_t v = pca.input_dim();
  const std::size_t k = pca.output_dim();
  // Projection of the mean is shared by every row.
  std::vector<double> mean_proj(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double* comp = pca.components.data() + i * v;
    for (std::size_t j = 0; j < v; ++j) mean_proj[i] += comp[j] * pca.mean[j];
  }
  Tensor out({data.rows, k});
  for (std::size_t r = 0; r < data.rows; ++r) {
    for (std::size_t i = 0; i < k; ++i) {
      const double* comp = pca.components.data() + i * v;
      double acc = 0.0;
      for (const auto& [j, x] : data.entries[r]) acc += comp[j] * x;
      out(r, i) = acc - mean_proj[i];
    }
  }
  return out;
}

Tensor inverse_transform(const PcaModel& pca, const Tensor& projected) {
  require(projected.rank() == 2 && projected.dim(1) == pca.output_dim(), ErrorCode::ShapeMismatch,
          "projected width does not match the fitted model");
  const std::size_t t = projected.dim(0);
  const std::size_t v = pca.input_dim();
  Tensor out({t, v});
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t j = 0; j < v; ++j) out(r, j) = pca.mean[j];
    for (std::size_t i = 0; i < pca.output_dim(); ++i) {
      const double z = projected(r, i);
      const double* comp = pca.components.data() + i * v;
      for (std::size_t j = 0; j < v; ++j) out(r, j) += z * comp[j];
    }
  }
  return out;
}

}  // namespace notedx::baselines
