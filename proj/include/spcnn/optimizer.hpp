#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "spcnn/errors.hpp"
#include "spcnn/net.hpp"

namespace spcnn {

enum class LrSchedule { Fixed, Step };

struct TrainConfig {
  float alpha = 0.01f;
  float momentum = 0.9f;
  float weight_decay = 0.0005f;
  int batch_size = 256;
  int64_t iterations = 32000;
  uint64_t seed = 1;
  int64_t snapshot_interval = 1000;  // <= 0 disables intermediate snapshots
  LrSchedule schedule = LrSchedule::Fixed;
  float lr_gamma = 0.1f;
  int64_t lr_step = 10000;
  bool decay_biases = true;

  void validate() const {
    if (!(alpha > 0.0f)) throw ConfigError("train: alpha must be > 0");
    if (momentum < 0.0f || momentum >= 1.0f) throw ConfigError("train: momentum outside [0,1)");
    if (weight_decay < 0.0f) throw ConfigError("train: weight decay must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (iterations < 0) throw ConfigError("train: iterations must be >= 0");
    if (schedule == LrSchedule::Step && lr_step < 1)
      throw ConfigError("train: lr_step must be >= 1 for the step schedule");
  }
};

/// One velocity tensor per learnable tensor, zero-initialized.
struct OptimizerState {
  ParamSet velocity;
  int64_t iteration = 0;
};

inline OptimizerState make_optimizer_state(const ParamSet& params) {
  return OptimizerState{zeros_like(params), 0};
}

inline float lr_at(const TrainConfig& cfg, int64_t iteration) {
  if (cfg.schedule == LrSchedule::Fixed) return cfg.alpha;
  float lr = cfg.alpha;
  for (int64_t k = cfg.lr_step; k <= iteration; k += cfg.lr_step) lr *= cfg.lr_gamma;
  return lr;
}

// v <- m*v - lr*(g + wd*w); w <- w + v.
inline void sgd_step(ParamSet& params, const ParamSet& grads, OptimizerState& opt,
                     const TrainConfig& cfg, float lr) {
  if (params.tensors.size() != grads.tensors.size() ||
      params.tensors.size() != opt.velocity.tensors.size())
    throw ConfigError("sgd: parameter/gradient/velocity sets differ in size");
  for (size_t t = 0; t < params.tensors.size(); ++t) {
    const std::string& name = params.tensors[t].name;
    if (grads.tensors[t].name != name || opt.velocity.tensors[t].name != name)
      throw ConfigError("sgd: tensor name mismatch at index " + std::to_string(t));
    Tensor& w = params.tensors[t].value;
    const Tensor& g = grads.tensors[t].value;
    Tensor& v = opt.velocity.tensors[t].value;
    if (!w.same_shape(g) || !w.same_shape(v))
      throw ConfigError("sgd: shape mismatch for tensor " + name);
    if (!g.all_finite()) throw NumericError("sgd: non-finite gradient in tensor " + name);

    const bool is_bias = name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0;
    const float wd = (!cfg.decay_biases && is_bias) ? 0.0f : cfg.weight_decay;
    for (int64_t i = 0; i < w.size(); ++i) {
      v[i] = cfg.momentum * v[i] - lr * (g[i] + wd * w[i]);
      w[i] = w[i] + v[i];
    }
  }
  ++opt.iteration;
}

}  // namespace spcnn
