#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "asdqn/errors.hpp"
#include "asdqn/neural.hpp"

namespace asdqn {

enum class OptimizerKind { sgd, rmsprop, adam };

inline const char* to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adam: return "adam";
  }
  return "?";
}

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "rmsprop") return OptimizerKind::rmsprop;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("agent.optimizer.kind", "expected sgd, rmsprop or adam, got '" + s + "'");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::rmsprop;
  double learning_rate = 2.5e-4;
  double decay = 0.95;     // rmsprop squared-gradient decay
  double beta1 = 0.9;      // adam
  double beta2 = 0.999;    // adam
  double epsilon = 1e-6;
  double clip_norm = 0.0;  // global L2 gradient clip; 0 disables

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("agent.optimizer.learning_rate", "must be positive");
    if (!(decay >= 0.0 && decay < 1.0)) throw ConfigError("agent.optimizer.decay", "must be in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("agent.optimizer.beta1", "must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("agent.optimizer.beta2", "must be in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("agent.optimizer.epsilon", "must be positive");
    if (!(clip_norm >= 0.0)) throw ConfigError("agent.optimizer.clip_norm", "must be >= 0");
  }
};

/// Optimizer hyperparameters plus per-parameter accumulators shaped like the
/// ParamSet they serve.
///
/// Update rules, with g the (optionally clipped) gradient:
///   sgd:     p -= lr * g
///   rmsprop: v = decay * v + (1 - decay) * g^2;  p -= lr * g / (sqrt(v) + eps)
///   adam:    m = b1 * m + (1 - b1) * g;  v = b2 * v + (1 - b2) * g^2;  t += 1
///            p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
struct OptimizerState {
  OptimizerConfig config;
  ParamSet first_moment;   // adam m
  ParamSet second_moment;  // rmsprop / adam v
  long long t = 0;

  OptimizerState() = default;
  OptimizerState(OptimizerConfig cfg, const ParamSet& like)
      : config(cfg), first_moment(like.dims), second_moment(like.dims) {
    config.validate();
  }

  friend bool operator==(const OptimizerState& a, const OptimizerState& b) {
    return a.t == b.t && a.first_moment == b.first_moment && a.second_moment == b.second_moment;
  }
};

inline double global_norm(const ParamSet& g) {
  double sq = 0.0;
  for (const auto& layer : g.layers) sq += layer.weight.squaredNorm() + layer.bias.squaredNorm();
  return std::sqrt(sq);
}

inline void optimizer_step(ParamSet& params, const ParamSet& grads, OptimizerState& opt) {
  if (!params.same_shape(grads) || !params.same_shape(opt.second_moment)) {
    throw std::invalid_argument("optimizer_step: shape mismatch");
  }
  const auto& cfg = opt.config;
  double scale = 1.0;
  if (cfg.clip_norm > 0.0) {
    const double norm = global_norm(grads);
    if (norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
  }
  ++opt.t;
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto apply = [&](auto& p, const auto& g_raw, auto& m, auto& v) {
      const auto g = (g_raw.array() * scale).eval();
      switch (cfg.kind) {
        case OptimizerKind::sgd:
          p.array() -= cfg.learning_rate * g;
          break;
        case OptimizerKind::rmsprop:
          v.array() = cfg.decay * v.array() + (1.0 - cfg.decay) * g.square();
          p.array() -= cfg.learning_rate * g / (v.array().sqrt() + cfg.epsilon);
          break;
        case OptimizerKind::adam:
          m.array() = cfg.beta1 * m.array() + (1.0 - cfg.beta1) * g;
          v.array() = cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.square();
          p.array() -= cfg.learning_rate * (m.array() / bias1) / ((v.array() / bias2).sqrt() + cfg.epsilon);
          break;
      }
    };
    apply(params.layers[l].weight, grads.layers[l].weight, opt.first_moment.layers[l].weight,
          opt.second_moment.layers[l].weight);
    apply(params.layers[l].bias, grads.layers[l].bias, opt.first_moment.layers[l].bias,
          opt.second_moment.layers[l].bias);
  }
}

}  // namespace asdqn
