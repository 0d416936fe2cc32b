#include "notedx/adam.hpp"

#include <cmath>

namespace notedx::nn {

AdamState::AdamState(std::span<Tensor* const> params, AdamOptions options) : options_(options) {
  first_.reserve(params.size());
  second_.reserve(params.size());
  for (const Tensor* p : params) {
    first_.emplace_back(p->shape());
    second_.emplace_back(p->shape());
  }
}

void AdamState::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
  require(params.size() == first_.size() && grads.size() == first_.size(),
          ErrorCode::ShapeMismatch, "adam parameter list does not match its state");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i]->same_shape(first_[i]) && grads[i]->same_shape(first_[i]),
            ErrorCode::ShapeMismatch, "adam parameter " + std::to_string(i) + " changed shape");
  }
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i]->data();
    const double* g = grads[i]->data();
    double* m = first_[i].data();
    double* v = second_[i].data();
    const std::size_t n = params[i]->size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

void sgd_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
              double learning_rate) {
  require(params.size() == grads.size(), ErrorCode::ShapeMismatch,
          "sgd parameter and gradient lists differ in length");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i]->same_shape(*grads[i]), ErrorCode::ShapeMismatch, "sgd gradient shape");
    for (std::size_t j = 0; j < params[i]->size(); ++j) {
      (*params[i])[j] -= learning_rate * (*grads[i])[j];
    }
  }
}

}  // namespace notedx::nn
