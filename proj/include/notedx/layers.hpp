#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "notedx/random.hpp"
#include "notedx/tensor.hpp"

namespace notedx::nn {

/// Embedding table row reserved for padding. It is always read as zeros and
/// never receives gradient.
inline constexpr std::int32_t kPaddingId = 0;

// ---------------------------------------------------------------- embedding

/// Gathers rows of a V x E table into an L x E tensor.
Tensor embedding_lookup(std::span<const std::int32_t> ids, const Tensor& table);

/// Accumulates grad_out (L x E) into the rows of grad_table selected by ids.
void embedding_lookup_backward(std::span<const std::int32_t> ids, const Tensor& grad_out,
                               Tensor& grad_table);

// ---------------------------------------------------------------- convolution

enum class Activation { Relu, Identity };

/// F filters of height H spanning the full embedding width E.
struct FilterBank {
  Tensor weights;  // F x H x E
  Tensor biases;   // F

  FilterBank() = default;
  FilterBank(std::size_t filters, std::size_t height, std::size_t width)
      : weights({filters, height, width}), biases({filters}) {}

  std::size_t filters() const { return weights.dim(0); }
  std::size_t height() const { return weights.dim(1); }
  std::size_t width() const { return weights.dim(2); }
};

struct FilterBankGrad {
  Tensor weights;
  Tensor biases;

  explicit FilterBankGrad(const FilterBank& bank)
      : weights(bank.weights.shape()), biases(bank.biases.shape()) {}
};

/// Rows of zero padding placed before the input so that a height-H window
/// yields exactly L outputs. The remaining H-1-leading rows go after it.
inline std::size_t leading_padding(std::size_t height) { return height / 2; }

struct ConvOutput {
  Tensor preactivation;  // L x F
  Tensor output;         // L x F, activation applied
};

/// "Same" 1-D convolution over the time axis:
///   pre[t, f] = b_f + sum_{h,e} W[f,h,e] * padded[t+h, e]
/// where padded has ceil((H-1)/2) zero rows in front and floor((H-1)/2) behind.
ConvOutput conv1d_same(const Tensor& input, const FilterBank& bank,
                       Activation activation = Activation::Relu);

/// Backward through activation and convolution. grad_output is L x F. Zero
/// gradient rows are skipped, which is what makes the pooled path cheap.
/// Gradients are accumulated into grad_bank; grad_input (L x E) is returned.
Tensor conv1d_same_backward(const Tensor& input, const FilterBank& bank, const ConvOutput& forward,
                            const Tensor& grad_output, FilterBankGrad& grad_bank,
                            Activation activation = Activation::Relu);

// ---------------------------------------------------------------- pooling

struct PoolOutput {
  Tensor values;                    // F
  std::vector<std::size_t> argmax;  // F, first occurrence on ties
};

PoolOutput max_pool_time(const Tensor& input);
Tensor max_pool_time_backward(const PoolOutput& forward, std::size_t length,
                              const Tensor& grad_output);

// ---------------------------------------------------------------- dense

/// y = W x + b with W of shape K x F.
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);
/// Accumulates dW and db; returns dx.
Tensor dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output,
                      Tensor& grad_weights, Tensor& grad_bias);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

// ---------------------------------------------------------------- dropout

enum class Mode { Train, Infer };

struct DropoutOutput {
  Tensor output;
  Tensor mask;  // 0 or 1/p_keep per entry; all ones in infer mode
};

/// Inverted dropout: kept entries are scaled by 1/p_keep at train time so
/// inference is the identity.
DropoutOutput dropout(const Tensor& input, double p_keep, Mode mode, Rng& rng);
Tensor dropout_backward(const DropoutOutput& forward, const Tensor& grad_output);

// ---------------------------------------------------------------- softmax / loss

Tensor softmax(const Tensor& logits);

/// -log pi[k] for the hot index k of a one-hot target.
double cross_entropy(const Tensor& one_hot, const Tensor& probs);
/// Gradient of cross_entropy(y, softmax(x)) with respect to x: pi - y.
Tensor softmax_cross_entropy_backward(const Tensor& one_hot, const Tensor& probs);

Tensor one_hot(std::size_t index, std::size_t classes);

}  // namespace notedx::nn
