#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "notedx/tensor.hpp"

namespace notedx::nn {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for a fixed list of parameter tensors. The list order at
/// construction is the order step() expects.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<Tensor* const> params, AdamOptions options);

  /// One bias-corrected Adam update: params -= lr * m_hat / (sqrt(v_hat) + eps).
  void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads);

  std::uint64_t steps() const noexcept { return steps_; }
  const AdamOptions& options() const noexcept { return options_; }
  const std::vector<Tensor>& first_moments() const noexcept { return first_; }
  const std::vector<Tensor>& second_moments() const noexcept { return second_; }

 private:
  AdamOptions options_;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
  std::uint64_t steps_ = 0;
};

/// Plain gradient descent, kept for comparison with the Adam default.
void sgd_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
              double learning_rate);

}  // namespace notedx::nn
