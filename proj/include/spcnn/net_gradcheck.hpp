#pragma once

#include <string>
#include <vector>

#include "spcnn/gradcheck.hpp"
#include "spcnn/net.hpp"

namespace spcnn {

// Tiny two-level network used for the end-to-end gradient spot check.
inline NetworkSpec gradcheck_net_spec() {
  NetworkSpec spec;
  spec.pyramid_levels = 2;
  spec.fc6_width = 16;
  spec.fc7_width = 16;
  spec.class_count = 3;
  spec.dropout_rate = 0.0f;
  const std::vector<LayerDesc> tower = {conv_layer(4, 3, 1, 1), relu_layer(), pool_layer(2, 2),
                                        conv_layer(6, 3, 1, 1), relu_layer(), pool_layer(2, 2)};
  spec.streams.push_back(StreamSpec{8, tower});
  for (int i = 0; i < 4; ++i) spec.streams.push_back(StreamSpec{4, tower});
  return spec;
}

/// Finite-difference spot check of `samples` randomly chosen parameters
/// through the full forward/backward of the mini network (float32).
inline double gradcheck_network(uint64_t seed, int samples = 20) {
  const NetworkSpec spec = gradcheck_net_spec();
  NetworkState state = init_params(spec, mix64(seed, 0xace));
  Rng rng(mix64(seed, 0xbee));

  std::vector<Tensor> batches;
  for (const StreamSpec& s : spec.streams) {
    Tensor t({2, 3, s.input_size, s.input_size});
    fill_uniform(t, rng, -1.0, 1.0);
    batches.push_back(std::move(t));
  }
  std::vector<int> labels = {static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3))};

  const auto loss = [&] {
    const Tensor logits = forward(spec, state, batches, false);
    return static_cast<double>(softmax_xent(logits, labels).loss);
  };

  ForwardCache cache;
  const Tensor logits = forward(spec, state, batches, false, nullptr, &cache);
  const auto xent = softmax_xent(logits, labels);
  const ParamSet grads = backward(spec, state, cache, xent.grad_logits);

  const int64_t total = state.params.total_elements();
  std::vector<double> analytic, numeric;
  for (int s = 0; s < samples; ++s) {
    int64_t flat = static_cast<int64_t>(rng.below(static_cast<uint64_t>(total)));
    size_t ti = 0;
    while (flat >= state.params.tensors[ti].value.size()) {
      flat -= state.params.tensors[ti].value.size();
      ++ti;
    }
    float& w = state.params.tensors[ti].value[flat];
    const float g = grads.tensors[ti].value[flat];
    const float old = w;
    const double eps = 1e-3;
    const float hi = static_cast<float>(static_cast<double>(old) + eps);
    const float lo = static_cast<float>(static_cast<double>(old) - eps);
    w = hi;
    const double lp = loss();
    w = lo;
    const double lm = loss();
    w = old;
    numeric.push_back((lp - lm) / (static_cast<double>(hi) - static_cast<double>(lo)));
    analytic.push_back(static_cast<double>(g));
  }

  double scale = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i)
    scale = std::max({scale, std::fabs(analytic[i]), std::fabs(numeric[i])});
  if (scale == 0.0) return 0.0;
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    if (analytic[i] == 0.0 && numeric[i] == 0.0) continue;
    const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), 1e-3 * scale});
    worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

struct GradCheckRow {
  std::string name;
  double error = 0.0;
  double threshold = 0.0;
};

/// The full suite: every kernel in 32-bit and 64-bit plus the end-to-end
/// network check. `sabotage` corrupts one analytic conv gradient; it is a
/// negative control for the harness itself.
inline std::vector<GradCheckRow> run_gradcheck_suite(uint64_t seed, bool sabotage = false) {
  std::vector<GradCheckRow> rows;
  rows.push_back({"conv f32", gradcheck_conv<float>(seed, sabotage), 1e-3});
  rows.push_back({"pool f32", gradcheck_pool<float>(seed), 1e-3});
  rows.push_back({"relu f32", gradcheck_relu<float>(seed), 1e-3});
  rows.push_back({"linear f32", gradcheck_linear<float>(seed), 1e-3});
  rows.push_back({"softmax f32", gradcheck_softmax<float>(seed), 1e-3});
  rows.push_back({"dropout f32", gradcheck_dropout<float>(seed), 1e-3});
  rows.push_back({"conv f64", gradcheck_conv<double>(seed), 1e-6});
  rows.push_back({"pool f64", gradcheck_pool<double>(seed), 1e-6});
  rows.push_back({"relu f64", gradcheck_relu<double>(seed), 1e-6});
  rows.push_back({"linear f64", gradcheck_linear<double>(seed), 1e-6});
  rows.push_back({"softmax f64", gradcheck_softmax<double>(seed), 1e-6});
  rows.push_back({"dropout f64", gradcheck_dropout<double>(seed), 1e-6});
  rows.push_back({"network f32", gradcheck_network(seed), 1e-2});
  return rows;
}

}  // namespace spcnn
