#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "spcnn/kernels.hpp"
#include "spcnn/tensor.hpp"

namespace spcnn {

// Central finite differences against analytic gradients.
//
// For each checked index the value is perturbed to value+eps and value-eps
// (rounded in T, and the actually-realized step is used as the divisor),
// the scalar loss is re-evaluated, and the two-sided slope is compared with
// analytic[i]. The relative error uses max(|analytic|, |numeric|) as the
// denominator, floored at rel_floor times the largest gradient magnitude in
// the checked set so that near-zero entries do not blow up the ratio. If
// every gradient in the set is exactly zero the error is 0 by convention.
template <typename T>
double grad_check_values(T* values, const T* analytic, const std::vector<int64_t>& indices,
                         const std::function<double()>& loss, double eps,
                         double rel_floor = 1e-3) {
  std::vector<double> numeric(indices.size());
  for (size_t k = 0; k < indices.size(); ++k) {
    const int64_t i = indices[k];
    const T old = values[i];
    const T hi = static_cast<T>(static_cast<double>(old) + eps);
    const T lo = static_cast<T>(static_cast<double>(old) - eps);
    values[i] = hi;
    const double lp = loss();
    values[i] = lo;
    const double lm = loss();
    values[i] = old;
    const double step = static_cast<double>(hi) - static_cast<double>(lo);
    numeric[k] = (lp - lm) / step;
  }
  double scale = 0.0;
  for (size_t k = 0; k < indices.size(); ++k) {
    scale = std::max(scale, std::fabs(static_cast<double>(analytic[indices[k]])));
    scale = std::max(scale, std::fabs(numeric[k]));
  }
  if (scale == 0.0) return 0.0;
  double worst = 0.0;
  for (size_t k = 0; k < indices.size(); ++k) {
    const double a = static_cast<double>(analytic[indices[k]]);
    const double n = numeric[k];
    if (a == 0.0 && n == 0.0) continue;
    const double denom = std::max({std::fabs(a), std::fabs(n), rel_floor * scale});
    worst = std::max(worst, std::fabs(a - n) / denom);
  }
  return worst;
}

template <typename T>
double grad_check_tensor(TensorT<T>& values, const TensorT<T>& analytic,
                         const std::function<double()>& loss, double eps) {
  std::vector<int64_t> all(static_cast<size_t>(values.size()));
  for (int64_t i = 0; i < values.size(); ++i) all[static_cast<size_t>(i)] = i;
  return grad_check_values(values.data(), analytic.data(), all, loss, eps);
}

// Random projection target: loss = sum(output .* G) accumulated in double.
template <typename T>
double project(const TensorT<T>& out, const TensorT<T>& g) {
  double acc = 0.0;
  for (int64_t i = 0; i < out.size(); ++i)
    acc += static_cast<double>(out[i]) * static_cast<double>(g[i]);
  return acc;
}

template <typename T>
void fill_uniform(TensorT<T>& t, Rng& rng, double lo, double hi) {
  for (int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(lo + (hi - lo) * rng.uniform());
}

template <typename T>
void fill_normal(TensorT<T>& t, Rng& rng, double stddev) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.normal() * stddev);
}

inline double gradcheck_eps() { return 1e-3; }
template <typename T>
double gradcheck_eps_for() {
  return sizeof(T) == 8 ? 1e-5 : 1e-3;
}

// Canned per-kernel checks, shared between the test suite and the CLI.

template <typename T>
double gradcheck_conv(uint64_t seed, bool sabotage = false) {
  Rng rng(mix64(seed, 1));
  ConvParamsT<T> p;
  p.kernel = 3;
  p.stride = 2;
  p.pad = 1;
  p.in_channels = 3;
  p.out_channels = 4;
  p.weights = TensorT<T>({4, 3, 3, 3});
  p.bias = TensorT<T>({4});
  fill_uniform(p.weights, rng, -0.5, 0.5);
  fill_uniform(p.bias, rng, -0.5, 0.5);
  TensorT<T> input({2, 3, 6, 6});
  fill_uniform(input, rng, -1.0, 1.0);
  TensorT<T> g(conv2d_forward(input, p).shape());
  fill_uniform(g, rng, 0.5, 1.5);

  const auto loss = [&] { return project(conv2d_forward(input, p), g); };
  auto grads = conv2d_backward(input, p, g);
  if (sabotage) grads.weights[0] += T(0.5);  // negative control for the harness
  const double eps = gradcheck_eps_for<T>();
  double worst = grad_check_tensor(p.weights, grads.weights, loss, eps);
  worst = std::max(worst, grad_check_tensor(p.bias, grads.bias, loss, eps));
  worst = std::max(worst, grad_check_tensor(input, grads.input, loss, eps));
  return worst;
}

template <typename T>
double gradcheck_pool(uint64_t seed) {
  Rng rng(mix64(seed, 2));
  TensorT<T> input({2, 3, 7, 7});
  // Distinct values keep the check away from argmax ties.
  for (int64_t i = 0; i < input.size(); ++i)
    input[i] = static_cast<T>(rng.uniform() + 0.01 * static_cast<double>(i));
  PoolParams p{3, 2};
  PoolStateT<T> st;
  TensorT<T> g(maxpool_forward(input, p, st).shape());
  fill_uniform(g, rng, 0.5, 1.5);
  const auto loss = [&] {
    PoolStateT<T> s;
    return project(maxpool_forward(input, p, s), g);
  };
  const TensorT<T> grad_in = maxpool_backward(st, g);
  return grad_check_tensor(input, grad_in, loss, gradcheck_eps_for<T>());
}

template <typename T>
double gradcheck_relu(uint64_t seed) {
  Rng rng(mix64(seed, 3));
  TensorT<T> input({4, 16});
  for (int64_t i = 0; i < input.size(); ++i) {
    const double u = rng.uniform() * 2.0 - 1.0;
    input[i] = static_cast<T>(u + (u >= 0 ? 0.1 : -0.1));  // keep off the kink
  }
  TensorT<T> g(input.shape());
  fill_uniform(g, rng, 0.5, 1.5);
  const auto loss = [&] { return project(relu_forward(input), g); };
  const TensorT<T> grad_in = relu_backward(input, g);
  return grad_check_tensor(input, grad_in, loss, gradcheck_eps_for<T>());
}

template <typename T>
double gradcheck_linear(uint64_t seed) {
  Rng rng(mix64(seed, 4));
  TensorT<T> input({3, 10}), w({10, 7}), b({7});
  fill_uniform(input, rng, -1.0, 1.0);
  fill_uniform(w, rng, -0.5, 0.5);
  fill_uniform(b, rng, -0.5, 0.5);
  TensorT<T> g({3, 7});
  fill_uniform(g, rng, 0.5, 1.5);
  const auto loss = [&] { return project(linear_forward(input, w, b), g); };
  const auto grads = linear_backward(input, w, g);
  const double eps = gradcheck_eps_for<T>();
  double worst = grad_check_tensor(w, grads.weights, loss, eps);
  worst = std::max(worst, grad_check_tensor(b, grads.bias, loss, eps));
  worst = std::max(worst, grad_check_tensor(input, grads.input, loss, eps));
  return worst;
}

template <typename T>
double gradcheck_softmax(uint64_t seed) {
  Rng rng(mix64(seed, 5));
  TensorT<T> logits({4, 9});
  fill_uniform(logits, rng, -2.0, 2.0);
  std::vector<int> labels(4);
  for (auto& l : labels) l = static_cast<int>(rng.below(9));
  const auto loss = [&] { return static_cast<double>(softmax_xent(logits, labels).loss); };
  const auto res = softmax_xent(logits, labels);
  return grad_check_tensor(logits, res.grad_logits, loss, gradcheck_eps_for<T>());
}

template <typename T>
double gradcheck_dropout(uint64_t seed) {
  Rng rng(mix64(seed, 6));
  TensorT<T> input({4, 25});
  fill_uniform(input, rng, -1.0, 1.0);
  TensorT<T> g(input.shape());
  fill_uniform(g, rng, 0.5, 1.5);
  // Fixed mask: the rng is re-seeded for every evaluation, so the layer is
  // deterministic as required by the checker.
  const uint64_t mask_seed = mix64(seed, 7);
  const auto loss = [&] {
    Rng r(mask_seed);
    DropoutMaskT<T> m;
    return project(dropout_forward(input, 0.5f, r, true, m), g);
  };
  Rng r(mask_seed);
  DropoutMaskT<T> m;
  dropout_forward(input, 0.5f, r, true, m);
  const TensorT<T> grad_in = dropout_backward(m, g);
  return grad_check_tensor(input, grad_in, loss, gradcheck_eps_for<T>());
}

}  // namespace spcnn
