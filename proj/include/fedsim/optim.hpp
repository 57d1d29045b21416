#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "fedsim/error.hpp"
#include "fedsim/model.hpp"

namespace fedsim {

struct AdamHyper {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-7;
};

inline void validate(const AdamHyper& h) {
  if (!(h.lr > 0.0)) throw ConfigError("optimizer: lr must be positive");
  if (!(h.beta1 > 0.0 && h.beta1 < 1.0)) throw ConfigError("optimizer: beta1 must be in (0,1)");
  if (!(h.beta2 > 0.0 && h.beta2 < 1.0)) throw ConfigError("optimizer: beta2 must be in (0,1)");
  if (!(h.eps > 0.0)) throw ConfigError("optimizer: eps must be positive");
  if (h.weight_decay < 0.0) throw ConfigError("optimizer: weight_decay must be >= 0");
}

struct AdamState {
  ParamVector m;
  ParamVector v;
  std::int64_t t = 0;
};

inline AdamState make_adam_state(std::size_t n) {
  return {ParamVector(n, 0.0), ParamVector(n, 0.0), 0};
}

inline ParamVector sgd_step(const ParamVector& params, const ParamVector& grad,
                            double lr) {
  if (params.size() != grad.size()) {
    throw ShapeError("sgd_step: params/grad length mismatch");
  }
  ParamVector out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out[i] = params[i] - lr * grad[i];
  }
  ensure_finite(out, "sgd_step");
  return out;
}

// One Adam update. The L2 term enters the gradient before the moment
// updates (grad' = grad + weight_decay * params); bias correction uses the
// incremented step counter t+1.
inline std::pair<ParamVector, AdamState> adam_step(const AdamState& state,
                                                   const ParamVector& params,
                                                   const ParamVector& grad,
                                                   const AdamHyper& hyper) {
  validate(hyper);
  if (params.size() != grad.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adam_step: params/grad/state length mismatch");
  }
  AdamState next = state;
  next.t = state.t + 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(next.t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(next.t));
  ParamVector out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i] + hyper.weight_decay * params[i];
    next.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    next.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = next.m[i] / bc1;
    const double v_hat = next.v[i] / bc2;
    out[i] = params[i] - hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
  ensure_finite(out, "adam_step");
  return {std::move(out), std::move(next)};
}

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  AdamHyper hyper{};  // sgd reads hyper.lr only
};

inline void validate(const OptimizerConfig& cfg) {
  if (cfg.kind == OptimizerKind::kSgd) {
    if (!(cfg.hyper.lr > 0.0)) throw ConfigError("optimizer: lr must be positive");
  } else {
    validate(cfg.hyper);
  }
}

// Stateful convenience wrapper over the pure step functions. Created fresh
// for each training call; never shared.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, std::size_t n)
      : config_(config), state_(make_adam_state(n)) {
    validate(config);
  }

  void step(ParamVector& params, const ParamVector& grad) {
    if (config_.kind == OptimizerKind::kSgd) {
      params = sgd_step(params, grad, config_.hyper.lr);
    } else {
      auto [next_params, next_state] = adam_step(state_, params, grad, config_.hyper);
      params = std::move(next_params);
      state_ = std::move(next_state);
    }
  }

  const AdamState& state() const { return state_; }

 private:
  OptimizerConfig config_;
  AdamState state_;
};

}  // namespace fedsim
