#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "notedx/adam.hpp"
#include "notedx/baselines.hpp"
#include "notedx/layers.hpp"

namespace notedx::baselines {

namespace {

void require_finite(const Tensor& features) {
  require(features.rank() == 2, ErrorCode::ShapeMismatch, "features must be a T x D matrix");
  for (double x : features.values()) {
    if (!std::isfinite(x)) fail(ErrorCode::InvalidArgument, "features contain non-finite values");
  }
}

void require_labels(const std::vector<std::size_t>& labels, std::size_t rows, std::size_t classes) {
  require(labels.size() == rows, ErrorCode::ShapeMismatch, "one label per feature row is required");
  for (auto y : labels) require(y < classes, ErrorCode::UnknownLabel, "label index out of range");
}

/// Softmax of W x + b for row r, written into probs.
void row_probs(const Tensor& w, const Tensor& b, const Tensor& x, std::size_t r,
               std::vector<double>& probs) {
  const std::size_t k = b.size();
  const std::size_t d = x.dim(1);
  const double* xr = x.data() + r * d;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double* wc = w.data() + c * d;
    double acc = b[c];
    for (std::size_t j = 0; j < d; ++j) acc += wc[j] * xr[j];
    probs[c] = acc;
    top = std::max(top, acc);
  }
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    probs[c] = std::exp(probs[c] - top);
    total += probs[c];
  }
  for (std::size_t c = 0; c < k; ++c) probs[c] /= total;
}

double squared_norm(const LogRegModel& g) {
  double s = 0.0;
  for (double v : g.weights.values()) s += v * v;
  for (double v : g.bias.values()) s += v * v;
  return s;
}

/// a += scale * b over weights and bias.
void axpy(LogRegModel& a, double scale, const LogRegModel& b) {
  for (std::size_t i = 0; i < a.weights.size(); ++i) a.weights[i] += scale * b.weights[i];
  for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += scale * b.bias[i];
}

double inner(const LogRegModel& a, const LogRegModel& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.weights.size(); ++i) s += a.weights[i] * b.weights[i];
  for (std::size_t i = 0; i < a.bias.size(); ++i) s += a.bias[i] * b.bias[i];
  return s;
}

}  // namespace

std::vector<std::size_t> argmax_rows(const Tensor& probs) {
  std::vector<std::size_t> out(probs.dim(0));
  const std::size_t k = probs.dim(1);
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* p = probs.data() + r * k;
    out[r] = static_cast<std::size_t>(std::max_element(p, p + k) - p);
  }
  return out;
}

// ---------------------------------------------------------------- logistic regression

double logreg_objective(const LogRegModel& model, const Tensor& features,
                        const std::vector<std::size_t>& labels, double l2, LogRegModel* gradient) {
  const std::size_t n = features.dim(0);
  const std::size_t d = features.dim(1);
  const std::size_t k = model.classes();
  if (gradient) {
    gradient->weights = Tensor({k, d});
    gradient->bias = Tensor({k});
  }
  std::vector<double> probs(k);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    row_probs(model.weights, model.bias, features, r, probs);
    loss -= std::log(std::max(probs[labels[r]], 1e-300));
    if (!gradient) continue;
    const double* xr = features.data() + r * d;
    for (std::size_t c = 0; c < k; ++c) {
      const double g = (probs[c] - (c == labels[r] ? 1.0 : 0.0)) * inv_n;
      gradient->bias[c] += g;
      double* gw = gradient->weights.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) gw[j] += g * xr[j];
    }
  }
  loss *= inv_n;
  double reg = 0.0;
  for (double w : model.weights.values()) reg += w * w;
  loss += 0.5 * l2 * reg;
  if (gradient) {
    for (std::size_t i = 0; i < model.weights.size(); ++i) gradient->weights[i] += l2 * model.weights[i];
  }
  return loss;
}

LogRegModel train_logreg(const Tensor& features, const std::vector<std::size_t>& labels,
                         std::size_t classes, LogRegOptions options) {
  require_finite(features);
  require_labels(labels, features.dim(0), classes);
  require(features.dim(0) >= 1, ErrorCode::EmptyInput, "no training rows");
  const std::size_t d = features.dim(1);

  LogRegModel x;
  x.weights = Tensor({classes, d});
  x.bias = Tensor({classes});
  LogRegModel g;
  double f = logreg_objective(x, features, labels, options.l2, &g);
  std::deque<double> recent{f};
  double step = 1.0 / std::max(1.0, std::sqrt(squared_norm(g)));

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const double gnorm2 = squared_norm(g);
    x.gradient_norm = std::sqrt(gnorm2);
    if (x.gradient_norm < options.tolerance) {
      x.converged = true;
      x.iterations = it;
      return x;
    }
    const double reference = *std::max_element(recent.begin(), recent.end());
    LogRegModel trial;
    LogRegModel trial_grad;
    double trial_f = 0.0;
    for (int backtrack = 0;; ++backtrack) {
      trial = x;
      axpy(trial, -step, g);
      trial_f = logreg_objective(trial, features, labels, options.l2, &trial_grad);
      if (trial_f <= reference - 1e-4 * step * gnorm2 || backtrack >= 60) break;
      step *= 0.5;
    }
    // Barzilai-Borwein step from the last displacement and gradient change.
    LogRegModel s = trial;
    axpy(s, -1.0, x);
    LogRegModel y = trial_grad;
    axpy(y, -1.0, g);
    const double sy = inner(s, y);
    step = sy > 0 ? std::clamp(inner(s, s) / sy, 1e-10, 1e10) : 1.0;

    x.weights = std::move(trial.weights);
    x.bias = std::move(trial.bias);
    g = std::move(trial_grad);
    f = trial_f;
    recent.push_back(f);
    if (recent.size() > 10) recent.pop_front();
    x.iterations = it + 1;
  }
  x.gradient_norm = std::sqrt(squared_norm(g));
  x.converged = x.gradient_norm < options.tolerance;
  return x;
}

Tensor predict_proba(const LogRegModel& model, const Tensor& features) {
  require_finite(features);
  require(features.dim(1) == model.weights.dim(1), ErrorCode::ShapeMismatch,
          "feature width does not match the model");
  const std::size_t n = features.dim(0);
  const std::size_t k = model.classes();
  Tensor out({n, k});
  std::vector<double> probs(k);
  for (std::size_t r = 0; r < n; ++r) {
    row_probs(model.weights, model.bias, features, r, probs);
    std::copy(probs.begin(), probs.end(), out.data() + r * k);
  }
  return out;
}

// ---------------------------------------------------------------- MLP

std::vector<Tensor*> MlpModel::parameters() {
  std::vector<Tensor*> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(&weights[l]);
    out.push_back(&biases[l]);
  }
  return out;
}

MlpModel init_mlp(std::size_t inputs, std::size_t classes, const MlpOptions& options) {
  MlpModel m;
  std::vector<std::size_t> sizes{inputs};
  sizes.insert(sizes.end(), options.hidden.begin(), options.hidden.end());
  sizes.push_back(classes);
  Rng rng(mix_seed(options.seed, 0x31F));
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
    Tensor w({sizes[l + 1], sizes[l]});
    Tensor b({sizes[l + 1]});
    for (double& x : w.values()) x = uniform(rng, -bound, bound);
    for (double& x : b.values()) x = uniform(rng, -bound, bound);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  return m;
}

namespace {

Tensor row_tensor(const Tensor& features, std::size_t r) {
  const std::size_t d = features.dim(1);
  return Tensor::from({d}, std::vector<double>(features.data() + r * d, features.data() + (r + 1) * d));
}

/// Loss for one row; accumulates gradients when grads is non-null.
double mlp_example(const MlpModel& m, const Tensor& x, std::size_t label, std::vector<Tensor>* grads) {
  const std::size_t layers = m.weights.size();
  std::vector<Tensor> inputs{x};
  std::vector<Tensor> pre;
  for (std::size_t l = 0; l < layers; ++l) {
    pre.push_back(nn::dense(inputs.back(), m.weights[l], m.biases[l]));
    if (l + 1 < layers) inputs.push_back(nn::relu(pre.back()));
  }
  const Tensor probs = nn::softmax(pre.back());
  const Tensor target = nn::one_hot(label, probs.size());
  const double loss = nn::cross_entropy(target, probs);
  if (!grads) return loss;
  Tensor g = nn::softmax_cross_entropy_backward(target, probs);
  for (std::size_t l = layers; l-- > 0;) {
    Tensor gx = nn::dense_backward(inputs[l], m.weights[l], g, (*grads)[2 * l], (*grads)[2 * l + 1]);
    if (l > 0) g = nn::relu_backward(pre[l - 1], gx);
  }
  return loss;
}

std::vector<Tensor> zero_grads(const MlpModel& m) {
  std::vector<Tensor> g;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    g.emplace_back(m.weights[l].shape());
    g.emplace_back(m.biases[l].shape());
  }
  return g;
}

}  // namespace

double mlp_loss(const MlpModel& model, const Tensor& features, const std::vector<std::size_t>& labels,
                std::vector<Tensor>* grads) {
  const std::size_t n = features.dim(0);
  require(n >= 1, ErrorCode::EmptyInput, "no rows to score");
  if (grads) *grads = zero_grads(model);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) loss += mlp_example(model, row_tensor(features, r), labels[r], grads);
  const double inv = 1.0 / static_cast<double>(n);
  if (grads) {
    for (auto& g : *grads) {
      for (double& v : g.values()) v *= inv;
    }
  }
  return loss * inv;
}

MlpModel train_mlp(const Tensor& features, const std::vector<std::size_t>& labels,
                   std::size_t classes, const MlpOptions& options) {
  require_finite(features);
  require_labels(labels, features.dim(0), classes);
  const std::size_t n = features.dim(0);
  require(n >= 1, ErrorCode::EmptyInput, "no training rows");
  MlpModel model = init_mlp(features.dim(1), classes, options);
  if (options.max_epochs == 0) return model;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(options.seed, 0x4D4C50));
  shuffle(std::span<std::size_t>(order), rng);
  const auto holdout = n >= 10 ? static_cast<std::size_t>(std::floor(options.holdout_fraction * n)) : 0;
  std::vector<std::size_t> held(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout));
  std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(holdout), order.end());

  auto holdout_loss = [&](const MlpModel& m) {
    const auto& rows = held.empty() ? fit : held;
    double loss = 0.0;
    for (auto r : rows) loss += mlp_example(m, row_tensor(features, r), labels[r], nullptr);
    return loss / static_cast<double>(rows.size());
  };

  std::vector<Tensor*> params = model.parameters();
  nn::AdamState adam(params, nn::AdamOptions{options.learning_rate});
  MlpModel best = model;
  double best_loss = holdout_loss(model);
  std::size_t since_best = 0;
  std::vector<Tensor> grads = zero_grads(model);
  const std::size_t batch = std::max<std::size_t>(1, std::min(options.batch_size, fit.size()));

  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    shuffle(std::span<std::size_t>(fit), rng);
    for (std::size_t start = 0; start < fit.size(); start += batch) {
      const std::size_t end = std::min(fit.size(), start + batch);
      for (auto& g : grads) g.fill(0.0);
      for (std::size_t i = start; i < end; ++i) {
        mlp_example(model, row_tensor(features, fit[i]), labels[fit[i]], &grads);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& g : grads) {
        for (double& v : g.values()) v *= inv;
      }
      std::vector<const Tensor*> gp;
      for (const auto& g : grads) gp.push_back(&g);
      adam.step(params, gp);
    }
    model.epochs_run = epoch;
    const double loss = holdout_loss(model);
    if (loss < best_loss) {
      best_loss = loss;
      best = model;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }
  best.epochs_run = model.epochs_run;
  return best;
}

Tensor predict_proba(const MlpModel& model, const Tensor& features) {
  require_finite(features);
  const std::size_t n = features.dim(0);
  const std::size_t k = model.biases.back().size();
  Tensor out({n, k});
  for (std::size_t r = 0; r < n; ++r) {
    Tensor h = row_tensor(features, r);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      h = nn::dense(h, model.weights[l], model.biases[l]);
      if (l + 1 < model.weights.size()) h = nn::relu(h);
    }
    const Tensor p = nn::softmax(h);
    std::copy(p.values().begin(), p.values().end(), out.data() + r * k);
  }
  return out;
}

}  // namespace notedx::baselines
