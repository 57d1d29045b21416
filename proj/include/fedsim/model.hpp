#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/matrix.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Flat ordered parameter vector. Aggregation averages by position, so the
// layout documented at param_count() is part of the contract.
using ParamVector = std::vector<double>;

inline void ensure_finite(const ParamVector& v, const char* context) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw ShapeError(std::string(context) + ": non-finite parameter entry");
    }
  }
}

enum class ModelKind {
  kSoftmaxRegression,  // single affine layer + softmax
  kMlp1,               // affine -> ReLU -> affine + softmax
};

struct ModelSpec {
  ModelKind kind = ModelKind::kSoftmaxRegression;
  int input_dim = 0;
  int num_classes = 0;
  int hidden_dim = 0;  // mlp-1 only
};

inline void validate(const ModelSpec& spec) {
  if (spec.input_dim < 1) throw ConfigError("model: input_dim must be >= 1");
  if (spec.num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  if (spec.kind == ModelKind::kMlp1 && spec.hidden_dim < 1) {
    throw ConfigError("model: hidden_dim must be >= 1 for mlp-1");
  }
}

// Parameter layout, fixed and position-stable:
//   softmax-regression: [W: num_classes x input_dim, row-major][b: num_classes]
//   mlp-1:              [W1: hidden x input][b1: hidden]
//                       [W2: classes x hidden][b2: classes]
inline std::size_t param_count(const ModelSpec& spec) {
  validate(spec);
  const std::size_t d = static_cast<std::size_t>(spec.input_dim);
  const std::size_t k = static_cast<std::size_t>(spec.num_classes);
  if (spec.kind == ModelKind::kSoftmaxRegression) {
    return (d + 1) * k;
  }
  const std::size_t h = static_cast<std::size_t>(spec.hidden_dim);
  return (d + 1) * h + (h + 1) * k;
}

struct Batch {
  Matrix features;          // rows x input_dim
  std::vector<int> labels;  // class indices in [0, num_classes)
};

inline void validate_batch(const ModelSpec& spec, const Batch& batch) {
  if (batch.features.rows < 1) throw ShapeError("batch: no rows");
  if (batch.features.cols != static_cast<std::size_t>(spec.input_dim)) {
    throw ShapeError("batch: feature row length does not match model input_dim");
  }
  if (batch.labels.size() != batch.features.rows) {
    throw ShapeError("batch: label count does not match feature rows");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= spec.num_classes) {
      throw ShapeError("batch: label out of range");
    }
  }
}

inline void check_params(const ModelSpec& spec, const ParamVector& params) {
  if (params.size() != param_count(spec)) {
    throw ShapeError("params: length does not match model spec");
  }
}

// Deterministic initialization: weights ~ Normal(0, 1/fan_in), biases 0.
inline ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  const std::size_t n = param_count(spec);
  ParamVector params(n, 0.0);
  Rng rng(derive_seed(seed, StreamTag::kInit));
  const auto fill_weights = [&rng](std::span<double> block, int fan_in) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& w : block) w = rng.next_normal() * scale;
  };
  const std::size_t d = static_cast<std::size_t>(spec.input_dim);
  const std::size_t k = static_cast<std::size_t>(spec.num_classes);
  if (spec.kind == ModelKind::kSoftmaxRegression) {
    fill_weights({params.data(), k * d}, spec.input_dim);
  } else {
    const std::size_t h = static_cast<std::size_t>(spec.hidden_dim);
    fill_weights({params.data(), h * d}, spec.input_dim);
    fill_weights({params.data() + h * d + h, k * h}, spec.hidden_dim);
  }
  ensure_finite(params, "init_params");
  return params;
}

namespace detail {

// logits row for one feature row; mlp path also exposes the hidden
// activations so the backward pass can reuse them.
inline void softmax_regression_logits(const ModelSpec& spec,
                                      const ParamVector& params,
                                      std::span<const double> x,
                                      std::span<double> logits) {
  const std::size_t d = static_cast<std::size_t>(spec.input_dim);
  const std::size_t k = static_cast<std::size_t>(spec.num_classes);
  const double* weights = params.data();
  const double* bias = params.data() + k * d;
  for (std::size_t c = 0; c < k; ++c) {
    double acc = bias[c];
    const double* wr = weights + c * d;
    for (std::size_t f = 0; f < d; ++f) acc += wr[f] * x[f];
    logits[c] = acc;
  }
}

inline void mlp1_logits(const ModelSpec& spec, const ParamVector& params,
                        std::span<const double> x, std::span<double> hidden_pre,
                        std::span<double> hidden, std::span<double> logits) {
  const std::size_t d = static_cast<std::size_t>(spec.input_dim);
  const std::size_t h = static_cast<std::size_t>(spec.hidden_dim);
  const std::size_t k = static_cast<std::size_t>(spec.num_classes);
  const double* w1 = params.data();
  const double* b1 = params.data() + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + k * h;
  for (std::size_t j = 0; j < h; ++j) {
    double acc = b1[j];
    const double* wr = w1 + j * d;
    for (std::size_t f = 0; f < d; ++f) acc += wr[f] * x[f];
    hidden_pre[j] = acc;
    hidden[j] = acc > 0.0 ? acc : 0.0;
  }
  for (std::size_t c = 0; c < k; ++c) {
    double acc = b2[c];
    const double* wr = w2 + c * h;
    for (std::size_t j = 0; j < h; ++j) acc += wr[j] * hidden[j];
    logits[c] = acc;
  }
}

}  // namespace detail

inline Matrix forward(const ModelSpec& spec, const ParamVector& params,
                      const Matrix& features) {
  validate(spec);
  check_params(spec, params);
  if (features.rows < 1) throw ShapeError("forward: no feature rows");
  if (features.cols != static_cast<std::size_t>(spec.input_dim)) {
    throw ShapeError("forward: feature row length does not match input_dim");
  }
  Matrix logits(features.rows, static_cast<std::size_t>(spec.num_classes));
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  if (spec.kind == ModelKind::kMlp1) {
    hidden_pre.resize(static_cast<std::size_t>(spec.hidden_dim));
    hidden.resize(static_cast<std::size_t>(spec.hidden_dim));
  }
  for (std::size_t r = 0; r < features.rows; ++r) {
    if (spec.kind == ModelKind::kSoftmaxRegression) {
      detail::softmax_regression_logits(spec, params, features.row(r),
                                        logits.row(r));
    } else {
      detail::mlp1_logits(spec, params, features.row(r), hidden_pre, hidden,
                          logits.row(r));
    }
  }
  return logits;
}

inline Matrix forward(const ModelSpec& spec, const ParamVector& params,
                      const Batch& batch) {
  validate_batch(spec, batch);
  return forward(spec, params, batch.features);
}

// Stabilized softmax probabilities of one logits row.
inline void softmax_row(std::span<const double> logits, std::span<double> probs) {
  if (logits.empty() || logits.size() != probs.size()) {
    throw ShapeError("softmax_row: bad row sizes");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - m);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
}

// log(sum(exp(row))) with max-subtraction.
inline double log_sum_exp(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  return m + std::log(sum);
}

// Mean cross-entropy over the batch.
inline double loss(const ModelSpec& spec, const ParamVector& params,
                   const Batch& batch) {
  validate_batch(spec, batch);
  const Matrix logits = forward(spec, params, batch.features);
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row(r);
    total += log_sum_exp(row) - row[static_cast<std::size_t>(batch.labels[r])];
  }
  return total / static_cast<double>(logits.rows);
}

// Mean cross-entropy and its exact analytic gradient in one pass.
inline std::pair<double, ParamVector> loss_and_gradient(const ModelSpec& spec,
                                                        const ParamVector& params,
                                                        const Batch& batch) {
  validate(spec);
  check_params(spec, params);
  validate_batch(spec, batch);
  const std::size_t n = batch.features.rows;
  const std::size_t d = static_cast<std::size_t>(spec.input_dim);
  const std::size_t k = static_cast<std::size_t>(spec.num_classes);
  const double inv_n = 1.0 / static_cast<double>(n);
  ParamVector grad(params.size(), 0.0);
  double total_loss = 0.0;

  std::vector<double> logits(k);
  std::vector<double> probs(k);

  if (spec.kind == ModelKind::kSoftmaxRegression) {
    double* g_w = grad.data();
    double* g_b = grad.data() + k * d;
    for (std::size_t r = 0; r < n; ++r) {
      const auto x = batch.features.row(r);
      const std::size_t y = static_cast<std::size_t>(batch.labels[r]);
      detail::softmax_regression_logits(spec, params, x, logits);
      total_loss += log_sum_exp(logits) - logits[y];
      softmax_row(logits, probs);
      for (std::size_t c = 0; c < k; ++c) {
        const double delta = (probs[c] - (c == y ? 1.0 : 0.0)) * inv_n;
        g_b[c] += delta;
        double* gw = g_w + c * d;
        for (std::size_t f = 0; f < d; ++f) gw[f] += delta * x[f];
      }
    }
  } else {
    const std::size_t h = static_cast<std::size_t>(spec.hidden_dim);
    const double* w2 = params.data() + h * d + h;
    double* g_w1 = grad.data();
    double* g_b1 = grad.data() + h * d;
    double* g_w2 = g_b1 + h;
    double* g_b2 = g_w2 + k * h;
    std::vector<double> hidden_pre(h);
    std::vector<double> hidden(h);
    std::vector<double> d_hidden(h);
    for (std::size_t r = 0; r < n; ++r) {
      const auto x = batch.features.row(r);
      const std::size_t y = static_cast<std::size_t>(batch.labels[r]);
      detail::mlp1_logits(spec, params, x, hidden_pre, hidden, logits);
      total_loss += log_sum_exp(logits) - logits[y];
      softmax_row(logits, probs);
      std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
      for (std::size_t c = 0; c < k; ++c) {
        const double delta = (probs[c] - (c == y ? 1.0 : 0.0)) * inv_n;
        g_b2[c] += delta;
        double* gw = g_w2 + c * h;
        const double* wr = w2 + c * h;
        for (std::size_t j = 0; j < h; ++j) {
          gw[j] += delta * hidden[j];
          d_hidden[j] += delta * wr[j];
        }
      }
      for (std::size_t j = 0; j < h; ++j) {
        // ReLU subgradient at exactly 0 is defined as 0
        if (hidden_pre[j] > 0.0) {
          const double dj = d_hidden[j];
          g_b1[j] += dj;
          double* gw = g_w1 + j * d;
          for (std::size_t f = 0; f < d; ++f) gw[f] += dj * x[f];
        }
      }
    }
  }
  ensure_finite(grad, "gradient");
  return {total_loss / static_cast<double>(n), std::move(grad)};
}

inline ParamVector gradient(const ModelSpec& spec, const ParamVector& params,
                            const Batch& batch) {
  return loss_and_gradient(spec, params, batch).second;
}

// Argmax with ties broken toward the lowest class index.
inline int predict(std::span<const double> logits_row) {
  if (logits_row.empty()) throw ShapeError("predict: empty logits row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits_row.size(); ++i) {
    if (logits_row[i] > logits_row[best]) best = i;
  }
  return static_cast<int>(best);
}

}  // namespace fedsim
