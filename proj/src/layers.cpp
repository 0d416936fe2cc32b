#include "notedx/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace notedx {

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace nn {

Tensor embedding_lookup(std::span<const std::int32_t> ids, const Tensor& table) {
  require(table.rank() == 2, ErrorCode::ShapeMismatch, "embedding table must be V x E");
  const std::size_t vocab = table.dim(0);
  const std::size_t width = table.dim(1);
  Tensor out({ids.size(), width});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      fail(ErrorCode::OutOfRange, "embedding id " + std::to_string(id) + " outside vocabulary of " +
                                      std::to_string(vocab));
    }
    if (id == kPaddingId) continue;
    std::copy_n(table.data() + static_cast<std::size_t>(id) * width, width,
                out.data() + i * width);
  }
  return out;
}

void embedding_lookup_backward(std::span<const std::int32_t> ids, const Tensor& grad_out,
                               Tensor& grad_table) {
  const std::size_t width = grad_table.dim(1);
  require_shape(grad_out, {ids.size(), width}, "embedding gradient");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= grad_table.dim(0)) {
      fail(ErrorCode::OutOfRange, "embedding id " + std::to_string(id) + " out of range");
    }
    if (id == kPaddingId) continue;
    double* dst = grad_table.data() + static_cast<std::size_t>(id) * width;
    const double* src = grad_out.data() + i * width;
    for (std::size_t e = 0; e < width; ++e) dst[e] += src[e];
  }
}

namespace {

/// Copies an L x E input into an (L+H-1) x E buffer with the leading and
/// trailing zero rows in place.
std::vector<double> pad_rows(const Tensor& input, std::size_t height) {
  const std::size_t length = input.dim(0);
  const std::size_t width = input.dim(1);
  std::vector<double> padded((length + height - 1) * width, 0.0);
  std::copy(input.values().begin(), input.values().end(),
            padded.begin() + static_cast<std::ptrdiff_t>(leading_padding(height) * width));
  return padded;
}

}  // namespace

ConvOutput conv1d_same(const Tensor& input, const FilterBank& bank, Activation activation) {
  require(input.rank() == 2, ErrorCode::ShapeMismatch, "convolution input must be L x E");
  if (input.dim(1) != bank.width()) {
    fail(ErrorCode::ShapeMismatch, "convolution input width " + std::to_string(input.dim(1)) +
                                       " does not match filter width " +
                                       std::to_string(bank.width()));
  }
  const std::size_t length = input.dim(0);
  const std::size_t filters = bank.filters();
  const std::size_t window = bank.height() * bank.width();
  const std::vector<double> padded = pad_rows(input, bank.height());

  // Window t is the contiguous block padded[t*E, t*E + H*E), so all windows
  // form an L x (H*E) matrix with row stride E.
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto rows = static_cast<Eigen::Index>(length);
  const auto cols = static_cast<Eigen::Index>(window);
  Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> windows(
      padded.data(), rows, cols, Eigen::OuterStride<>(static_cast<Eigen::Index>(bank.width())));
  Eigen::Map<const RowMat> weights(bank.weights.data(), static_cast<Eigen::Index>(filters), cols);

  ConvOutput out{Tensor({length, filters}), Tensor({length, filters})};
  Eigen::Map<RowMat> pre(out.preactivation.data(), rows, static_cast<Eigen::Index>(filters));
  pre.noalias() = windows * weights.transpose();
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t f = 0; f < filters; ++f) {
      const double v = (out.preactivation(t, f) += bank.biases[f]);
      out.output(t, f) = (activation == Activation::Relu && v < 0.0) ? 0.0 : v;
    }
  }
  return out;
}

Tensor conv1d_same_backward(const Tensor& input, const FilterBank& bank, const ConvOutput& forward,
                            const Tensor& grad_output, FilterBankGrad& grad_bank,
                            Activation activation) {
  const std::size_t length = input.dim(0);
  const std::size_t width = bank.width();
  const std::size_t height = bank.height();
  const std::size_t filters = bank.filters();
  const std::size_t window = height * width;
  require_shape(grad_output, {length, filters}, "convolution output gradient");

  const std::vector<double> padded = pad_rows(input, height);
  std::vector<double> grad_padded(padded.size(), 0.0);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t f = 0; f < filters; ++f) {
      double g = grad_output(t, f);
      if (g == 0.0) continue;
      if (activation == Activation::Relu && forward.preactivation(t, f) <= 0.0) continue;
      const double* x = padded.data() + t * width;
      const double* w = bank.weights.data() + f * window;
      double* gw = grad_bank.weights.data() + f * window;
      double* gx = grad_padded.data() + t * width;
      for (std::size_t i = 0; i < window; ++i) {
        gw[i] += g * x[i];
        gx[i] += g * w[i];
      }
      grad_bank.biases[f] += g;
    }
  }
  Tensor grad_input({length, width});
  std::copy_n(grad_padded.begin() + static_cast<std::ptrdiff_t>(leading_padding(height) * width),
              length * width, grad_input.data());
  return grad_input;
}

PoolOutput max_pool_time(const Tensor& input) {
  require(input.rank() == 2 && input.dim(0) >= 1, ErrorCode::ShapeMismatch,
          "max pooling needs an L x F input with L >= 1");
  const std::size_t length = input.dim(0);
  const std::size_t filters = input.dim(1);
  PoolOutput out{Tensor({filters}), std::vector<std::size_t>(filters, 0)};
  for (std::size_t f = 0; f < filters; ++f) out.values[f] = input(0, f);
  for (std::size_t t = 1; t < length; ++t) {
    for (std::size_t f = 0; f < filters; ++f) {
      if (input(t, f) > out.values[f]) {
        out.values[f] = input(t, f);
        out.argmax[f] = t;
      }
    }
  }
  return out;
}

Tensor max_pool_time_backward(const PoolOutput& forward, std::size_t length,
                              const Tensor& grad_output) {
  const std::size_t filters = forward.argmax.size();
  require_shape(grad_output, {filters}, "pooled gradient");
  Tensor grad({length, filters});
  for (std::size_t f = 0; f < filters; ++f) grad(forward.argmax[f], f) = grad_output[f];
  return grad;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  require(weights.rank() == 2, ErrorCode::ShapeMismatch, "dense weights must be K x F");
  const std::size_t out_dim = weights.dim(0);
  const std::size_t in_dim = weights.dim(1);
  require_shape(input, {in_dim}, "dense input");
  require_shape(bias, {out_dim}, "dense bias");
  Tensor out({out_dim});
  for (std::size_t k = 0; k < out_dim; ++k) {
    const double* w = weights.data() + k * in_dim;
    double acc = bias[k];
    for (std::size_t i = 0; i < in_dim; ++i) acc += w[i] * input[i];
    out[k] = acc;
  }
  return out;
}

Tensor dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output,
                      Tensor& grad_weights, Tensor& grad_bias) {
  const std::size_t out_dim = weights.dim(0);
  const std::size_t in_dim = weights.dim(1);
  require_shape(grad_output, {out_dim}, "dense output gradient");
  require_shape(grad_weights, weights.shape(), "dense weight gradient");
  Tensor grad_input({in_dim});
  for (std::size_t k = 0; k < out_dim; ++k) {
    const double g = grad_output[k];
    if (g == 0.0) continue;
    const double* w = weights.data() + k * in_dim;
    double* gw = grad_weights.data() + k * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) {
      gw[i] += g * input[i];
      grad_input[i] += g * w[i];
    }
    grad_bias[k] += g;
  }
  return grad_input;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values()) v = v < 0.0 ? 0.0 : v;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
  require(input.same_shape(grad_output), ErrorCode::ShapeMismatch, "relu gradient shape");
  Tensor grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (input[i] <= 0.0) grad[i] = 0.0;
  }
  return grad;
}

DropoutOutput dropout(const Tensor& input, double p_keep, Mode mode, Rng& rng) {
  if (!(p_keep > 0.0 && p_keep <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "dropout keep probability must lie in (0, 1]");
  }
  DropoutOutput out{input, Tensor(input.shape(), 1.0)};
  if (mode == Mode::Infer || p_keep == 1.0) return out;
  const double scale = 1.0 / p_keep;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double m = uniform01(rng) < p_keep ? scale : 0.0;
    out.mask[i] = m;
    out.output[i] = input[i] * m;
  }
  return out;
}

Tensor dropout_backward(const DropoutOutput& forward, const Tensor& grad_output) {
  require(forward.mask.same_shape(grad_output), ErrorCode::ShapeMismatch,
          "dropout gradient shape");
  Tensor grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= forward.mask[i];
  return grad;
}

Tensor softmax(const Tensor& logits) {
  require(!logits.empty(), ErrorCode::ShapeMismatch, "softmax of an empty vector");
  const double top = *std::max_element(logits.values().begin(), logits.values().end());
  Tensor probs(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - top);
    total += probs[i];
  }
  for (double& p : probs.values()) p /= total;
  return probs;
}

namespace {

std::size_t hot_index(const Tensor& one_hot) {
  std::size_t hot = one_hot.size();
  for (std::size_t i = 0; i < one_hot.size(); ++i) {
    if (one_hot[i] == 1.0 && hot == one_hot.size()) {
      hot = i;
    } else if (one_hot[i] != 0.0) {
      fail(ErrorCode::InvalidArgument, "target vector is not one-hot");
    }
  }
  require(hot < one_hot.size(), ErrorCode::InvalidArgument, "target vector is not one-hot");
  return hot;
}

}  // namespace

double cross_entropy(const Tensor& one_hot, const Tensor& probs) {
  require(one_hot.same_shape(probs), ErrorCode::ShapeMismatch, "cross-entropy shapes differ");
  return -std::log(probs[hot_index(one_hot)]);
}

Tensor softmax_cross_entropy_backward(const Tensor& one_hot, const Tensor& probs) {
  require(one_hot.same_shape(probs), ErrorCode::ShapeMismatch, "cross-entropy shapes differ");
  Tensor grad = probs;
  grad[hot_index(one_hot)] -= 1.0;
  return grad;
}

Tensor one_hot(std::size_t index, std::size_t classes) {
  require(index < classes, ErrorCode::OutOfRange, "one-hot index out of range");
  Tensor t({classes});
  t[index] = 1.0;
  return t;
}

}  // namespace nn
}  // namespace notedx
