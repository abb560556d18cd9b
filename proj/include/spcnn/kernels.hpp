#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spcnn/errors.hpp"
#include "spcnn/rng.hpp"
#include "spcnn/tensor.hpp"

namespace spcnn {

// Output-size recurrences. Convolution uses floor sizing; max pooling uses
// ceil sizing with the final window clipped to the input boundary, and a
// window whose start index lands at or past the input is dropped. The ceil
// convention is what the stream geometry of this project is built around.

inline int conv_out_size(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

inline int pool_out_size(int in, int kernel, int stride) {
  int out = (in - kernel + stride - 1) / stride + 1;  // ceil((in-k)/s) + 1
  while (out > 1 && (out - 1) * stride >= in) --out;
  return out;
}

template <typename T>
struct ConvParamsT {
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int in_channels = 0;
  int out_channels = 0;
  TensorT<T> weights;  // [outC, inC, k, k]
  TensorT<T> bias;     // [outC]

  void validate() const {
    if (kernel < 1 || stride < 1 || pad < 0)
      throw ConfigError("conv: kernel/stride/pad out of range");
    const std::vector<int> w{out_channels, in_channels, kernel, kernel};
    if (weights.shape() != w)
      throw ConfigError("conv: weight shape " + weights.shape_str() + " inconsistent with params");
    if (bias.shape() != std::vector<int>{out_channels})
      throw ConfigError("conv: bias shape " + bias.shape_str() + " inconsistent with out_channels");
  }
};

using ConvParams = ConvParamsT<float>;

namespace detail {

// col is [inC*k*k, outH*outW] for one sample; row index (c*k + i)*k + j.
template <typename T>
void im2col(const TensorT<T>& input, int n, int kernel, int stride, int pad, int out_h, int out_w,
            std::vector<T>& col) {
  const int in_c = input.dim(1), in_h = input.dim(2), in_w = input.dim(3);
  const int64_t plane = static_cast<int64_t>(out_h) * out_w;
  col.assign(static_cast<size_t>(in_c) * kernel * kernel * plane, T(0));
  for (int c = 0; c < in_c; ++c)
    for (int i = 0; i < kernel; ++i)
      for (int j = 0; j < kernel; ++j) {
        T* dst = col.data() + (((static_cast<int64_t>(c) * kernel + i) * kernel + j) * plane);
        for (int y = 0; y < out_h; ++y) {
          const int sy = y * stride + i - pad;
          if (sy < 0 || sy >= in_h) {
            dst += out_w;
            continue;
          }
          const T* src = &input.at4(n, c, sy, 0);
          for (int x = 0; x < out_w; ++x) {
            const int sx = x * stride + j - pad;
            *dst++ = (sx >= 0 && sx < in_w) ? src[sx] : T(0);
          }
        }
      }
}

template <typename T>
void col2im_add(const std::vector<T>& col, TensorT<T>& input, int n, int kernel, int stride,
                int pad, int out_h, int out_w) {
  const int in_c = input.dim(1), in_h = input.dim(2), in_w = input.dim(3);
  const int64_t plane = static_cast<int64_t>(out_h) * out_w;
  for (int c = 0; c < in_c; ++c)
    for (int i = 0; i < kernel; ++i)
      for (int j = 0; j < kernel; ++j) {
        const T* src = col.data() + (((static_cast<int64_t>(c) * kernel + i) * kernel + j) * plane);
        for (int y = 0; y < out_h; ++y) {
          const int sy = y * stride + i - pad;
          if (sy < 0 || sy >= in_h) {
            src += out_w;
            continue;
          }
          T* dst = &input.at4(n, c, sy, 0);
          for (int x = 0; x < out_w; ++x) {
            const int sx = x * stride + j - pad;
            if (sx >= 0 && sx < in_w) dst[sx] += src[x];
            ++src;
          }
        }
      }
}

}  // namespace detail

// out[n,o,y,x] = bias[o] + sum_{c,i,j} weights[o,c,i,j] * padded_input[n,c,y*s+i,x*s+j]
template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const ConvParamsT<T>& p) {
  p.validate();
  if (input.rank() != 4)
    throw ConfigError("conv: expected 4-D input, got " + input.shape_str());
  if (input.dim(1) != p.in_channels)
    throw ConfigError("conv: input has " + std::to_string(input.dim(1)) + " channels, params expect " +
                      std::to_string(p.in_channels));
  const int n = input.dim(0), in_h = input.dim(2), in_w = input.dim(3);
  if (in_h + 2 * p.pad < p.kernel || in_w + 2 * p.pad < p.kernel)
    throw ConfigError("conv: spatial size " + std::to_string(in_h) + "x" + std::to_string(in_w) +
                      " (+2*pad " + std::to_string(p.pad) + ") smaller than kernel " +
                      std::to_string(p.kernel));
  const int out_h = conv_out_size(in_h, p.kernel, p.stride, p.pad);
  const int out_w = conv_out_size(in_w, p.kernel, p.stride, p.pad);
  const int64_t plane = static_cast<int64_t>(out_h) * out_w;
  const int kk = p.in_channels * p.kernel * p.kernel;

  TensorT<T> out({n, p.out_channels, out_h, out_w});
  std::vector<T> col;
  for (int s = 0; s < n; ++s) {
    detail::im2col(input, s, p.kernel, p.stride, p.pad, out_h, out_w, col);
    for (int o = 0; o < p.out_channels; ++o) {
      T* dst = &out.at4(s, o, 0, 0);
      std::fill(dst, dst + plane, p.bias[o]);
      const T* wrow = p.weights.data() + static_cast<int64_t>(o) * kk;
      for (int k = 0; k < kk; ++k) {
        const T w = wrow[k];
        const T* c = col.data() + static_cast<int64_t>(k) * plane;
        for (int64_t q = 0; q < plane; ++q) dst[q] += w * c[q];
      }
    }
  }
  return out;
}

template <typename T>
struct ConvGradsT {
  TensorT<T> input;
  TensorT<T> weights;
  TensorT<T> bias;
};

template <typename T>
ConvGradsT<T> conv2d_backward(const TensorT<T>& input, const ConvParamsT<T>& p,
                              const TensorT<T>& grad_out) {
  p.validate();
  const int n = input.dim(0), in_h = input.dim(2), in_w = input.dim(3);
  const int out_h = conv_out_size(in_h, p.kernel, p.stride, p.pad);
  const int out_w = conv_out_size(in_w, p.kernel, p.stride, p.pad);
  if (grad_out.shape() != std::vector<int>{n, p.out_channels, out_h, out_w})
    throw ConfigError("conv backward: grad shape " + grad_out.shape_str() +
                      " does not match forward output");
  const int64_t plane = static_cast<int64_t>(out_h) * out_w;
  const int kk = p.in_channels * p.kernel * p.kernel;

  ConvGradsT<T> g;
  g.input = TensorT<T>(input.shape());
  g.weights = TensorT<T>(p.weights.shape());
  g.bias = TensorT<T>(p.bias.shape());

  std::vector<T> col, gcol(static_cast<size_t>(kk) * plane);
  for (int s = 0; s < n; ++s) {
    detail::im2col(input, s, p.kernel, p.stride, p.pad, out_h, out_w, col);
    std::fill(gcol.begin(), gcol.end(), T(0));
    for (int o = 0; o < p.out_channels; ++o) {
      const T* go = &grad_out.at4(s, o, 0, 0);
      T bsum = 0;
      for (int64_t q = 0; q < plane; ++q) bsum += go[q];
      g.bias[o] += bsum;
      T* gw = g.weights.data() + static_cast<int64_t>(o) * kk;
      const T* wrow = p.weights.data() + static_cast<int64_t>(o) * kk;
      for (int k = 0; k < kk; ++k) {
        const T* c = col.data() + static_cast<int64_t>(k) * plane;
        T* gc = gcol.data() + static_cast<int64_t>(k) * plane;
        T acc = 0;
        const T w = wrow[k];
        for (int64_t q = 0; q < plane; ++q) {
          acc += go[q] * c[q];
          gc[q] += w * go[q];
        }
        gw[k] += acc;
      }
    }
    detail::col2im_add(gcol, g.input, s, p.kernel, p.stride, p.pad, out_h, out_w);
  }
  return g;
}

struct PoolParams {
  int kernel = 1;
  int stride = 1;
};

// Forward records the winning input index per output element (ties to the
// lowest flat index); backward routes gradients through those indices only.
template <typename T>
struct PoolStateT {
  std::vector<int> in_shape;
  std::vector<int> out_shape;
  std::vector<int64_t> argmax;
  bool ready = false;
};

using PoolState = PoolStateT<float>;

template <typename T>
TensorT<T> maxpool_forward(const TensorT<T>& input, const PoolParams& p, PoolStateT<T>& state) {
  if (input.rank() != 4)
    throw ConfigError("maxpool: expected 4-D input, got " + input.shape_str());
  const int n = input.dim(0), c = input.dim(1), in_h = input.dim(2), in_w = input.dim(3);
  if (p.kernel < 1 || p.stride < 1) throw ConfigError("maxpool: kernel/stride out of range");
  if (p.kernel > in_h || p.kernel > in_w)
    throw ConfigError("maxpool: kernel " + std::to_string(p.kernel) + " exceeds input " +
                      std::to_string(in_h) + "x" + std::to_string(in_w));
  const int out_h = pool_out_size(in_h, p.kernel, p.stride);
  const int out_w = pool_out_size(in_w, p.kernel, p.stride);

  TensorT<T> out({n, c, out_h, out_w});
  state.in_shape = input.shape();
  state.out_shape = out.shape();
  state.argmax.assign(static_cast<size_t>(out.size()), 0);

  int64_t oi = 0;
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < out_h; ++y) {
        const int y0 = y * p.stride;
        const int y1 = std::min(y0 + p.kernel, in_h);
        for (int x = 0; x < out_w; ++x, ++oi) {
          const int x0 = x * p.stride;
          const int x1 = std::min(x0 + p.kernel, in_w);
          T best = input.at4(s, ch, y0, x0);
          int64_t best_idx = input.index4(s, ch, y0, x0);
          for (int yy = y0; yy < y1; ++yy)
            for (int xx = x0; xx < x1; ++xx) {
              const T v = input.at4(s, ch, yy, xx);
              if (v > best) {
                best = v;
                best_idx = input.index4(s, ch, yy, xx);
              }
            }
          out[oi] = best;
          state.argmax[static_cast<size_t>(oi)] = best_idx;
        }
      }
  state.ready = true;
  return out;
}

template <typename T>
TensorT<T> maxpool_backward(const PoolStateT<T>& state, const TensorT<T>& grad_out) {
  if (!state.ready) throw StateError("maxpool backward called before forward");
  if (grad_out.shape() != state.out_shape)
    throw ConfigError("maxpool backward: grad shape " + grad_out.shape_str() +
                      " does not match forward output");
  TensorT<T> grad_in(state.in_shape);
  for (int64_t i = 0; i < grad_out.size(); ++i)
    grad_in[state.argmax[static_cast<size_t>(i)]] += grad_out[i];
  return grad_in;
}

template <typename T>
TensorT<T> relu_forward(const TensorT<T>& input) {
  TensorT<T> out(input.shape());
  for (int64_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
  return out;
}

// Gradient at exactly 0 is 0.
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& input, const TensorT<T>& grad_out) {
  if (!input.same_shape(grad_out))
    throw ConfigError("relu backward: grad shape " + grad_out.shape_str() + " != input " +
                      input.shape_str());
  TensorT<T> grad_in(input.shape());
  for (int64_t i = 0; i < input.size(); ++i) grad_in[i] = input[i] > T(0) ? grad_out[i] : T(0);
  return grad_in;
}

template <typename T>
TensorT<T> linear_forward(const TensorT<T>& input, const TensorT<T>& weights,
                          const TensorT<T>& bias) {
  if (input.rank() != 2 || weights.rank() != 2 || bias.rank() != 1)
    throw ConfigError("linear: expected input [N,D], weights [D,K], bias [K]");
  const int n = input.dim(0), d = input.dim(1), k = weights.dim(1);
  if (weights.dim(0) != d)
    throw ConfigError("linear: inner dimension mismatch, input D=" + std::to_string(d) +
                      " vs weights D=" + std::to_string(weights.dim(0)));
  if (bias.dim(0) != k)
    throw ConfigError("linear: bias length " + std::to_string(bias.dim(0)) + " != K " +
                      std::to_string(k));
  TensorT<T> out({n, k});
  for (int r = 0; r < n; ++r) {
    T* dst = &out.at2(r, 0);
    std::copy(bias.data(), bias.data() + k, dst);
    const T* in = &input.at2(r, 0);
    for (int j = 0; j < d; ++j) {
      const T a = in[j];
      const T* w = &weights.at2(j, 0);
      for (int q = 0; q < k; ++q) dst[q] += a * w[q];
    }
  }
  return out;
}

template <typename T>
struct LinearGradsT {
  TensorT<T> input;
  TensorT<T> weights;
  TensorT<T> bias;
};

template <typename T>
LinearGradsT<T> linear_backward(const TensorT<T>& input, const TensorT<T>& weights,
                                const TensorT<T>& grad_out) {
  const int n = input.dim(0), d = input.dim(1), k = weights.dim(1);
  if (grad_out.shape() != std::vector<int>{n, k})
    throw ConfigError("linear backward: grad shape " + grad_out.shape_str() + " != [N,K]");
  LinearGradsT<T> g;
  g.input = TensorT<T>({n, d});
  g.weights = TensorT<T>({d, k});
  g.bias = TensorT<T>({k});
  for (int r = 0; r < n; ++r) {
    const T* go = &grad_out.at2(r, 0);
    const T* in = &input.at2(r, 0);
    for (int j = 0; j < d; ++j) {
      const T* w = &weights.at2(j, 0);
      T* gw = &g.weights.at2(j, 0);
      const T a = in[j];
      T acc = 0;
      for (int q = 0; q < k; ++q) {
        acc += go[q] * w[q];
        gw[q] += a * go[q];
      }
      g.input.at2(r, j) = acc;
    }
    for (int q = 0; q < k; ++q) g.bias[q] += go[q];
  }
  return g;
}

// Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate).
template <typename T>
struct DropoutMaskT {
  std::vector<uint8_t> keep;
  float rate = 0.0f;
  bool training = false;
};

using DropoutMask = DropoutMaskT<float>;

template <typename T>
TensorT<T> dropout_forward(const TensorT<T>& input, float rate, Rng& rng, bool training,
                           DropoutMaskT<T>& mask) {
  if (rate < 0.0f || rate >= 1.0f)
    throw ConfigError("dropout: rate " + std::to_string(rate) + " outside [0,1)");
  mask.rate = rate;
  mask.training = training;
  if (!training || rate == 0.0f) {
    mask.keep.clear();
    return input;
  }
  const T scale = T(1) / (T(1) - static_cast<T>(rate));
  mask.keep.assign(static_cast<size_t>(input.size()), 0);
  TensorT<T> out(input.shape());
  for (int64_t i = 0; i < input.size(); ++i) {
    if (rng.uniform() >= rate) {
      mask.keep[static_cast<size_t>(i)] = 1;
      out[i] = input[i] * scale;
    }
  }
  return out;
}

template <typename T>
TensorT<T> dropout_backward(const DropoutMaskT<T>& mask, const TensorT<T>& grad_out) {
  if (!mask.training || mask.rate == 0.0f) return grad_out;
  if (mask.keep.size() != static_cast<size_t>(grad_out.size()))
    throw StateError("dropout backward: mask does not match gradient size");
  const T scale = T(1) / (T(1) - static_cast<T>(mask.rate));
  TensorT<T> grad_in(grad_out.shape());
  for (int64_t i = 0; i < grad_out.size(); ++i)
    if (mask.keep[static_cast<size_t>(i)]) grad_in[i] = grad_out[i] * scale;
  return grad_in;
}

template <typename T>
struct SoftmaxXentResultT {
  T loss = 0;
  TensorT<T> grad_logits;  // (softmax - onehot) / N
  TensorT<T> probs;
};

template <typename T>
TensorT<T> softmax_rows(const TensorT<T>& logits) {
  if (logits.rank() != 2) throw ConfigError("softmax: expected [N,C] logits");
  const int n = logits.dim(0), c = logits.dim(1);
  TensorT<T> probs({n, c});
  for (int r = 0; r < n; ++r) {
    const T* z = &logits.at2(r, 0);
    T m = z[0];
    for (int j = 1; j < c; ++j) m = std::max(m, z[j]);
    double denom = 0.0;
    for (int j = 0; j < c; ++j) denom += std::exp(static_cast<double>(z[j] - m));
    for (int j = 0; j < c; ++j)
      probs.at2(r, j) = static_cast<T>(std::exp(static_cast<double>(z[j] - m)) / denom);
  }
  return probs;
}

template <typename T>
SoftmaxXentResultT<T> softmax_xent(const TensorT<T>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw ConfigError("softmax_xent: expected [N,C] logits");
  const int n = logits.dim(0), c = logits.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw ConfigError("softmax_xent: " + std::to_string(labels.size()) + " labels for batch of " +
                      std::to_string(n));
  for (int r = 0; r < n; ++r)
    if (labels[static_cast<size_t>(r)] < 0 || labels[static_cast<size_t>(r)] >= c)
      throw DataError("softmax_xent: sample " + std::to_string(r) + " has label " +
                      std::to_string(labels[static_cast<size_t>(r)]) + " outside [0," +
                      std::to_string(c) + ")");

  SoftmaxXentResultT<T> res;
  res.probs = softmax_rows(logits);
  res.grad_logits = TensorT<T>({n, c});
  double loss = 0.0;
  for (int r = 0; r < n; ++r) {
    const T* z = &logits.at2(r, 0);
    const int label = labels[static_cast<size_t>(r)];
    T m = z[0];
    for (int j = 1; j < c; ++j) m = std::max(m, z[j]);
    double lse = 0.0;
    for (int j = 0; j < c; ++j) lse += std::exp(static_cast<double>(z[j] - m));
    loss += std::log(lse) - static_cast<double>(z[label] - m);
    for (int j = 0; j < c; ++j) {
      const T y = (j == label) ? T(1) : T(0);
      res.grad_logits.at2(r, j) = (res.probs.at2(r, j) - y) / static_cast<T>(n);
    }
  }
  res.loss = static_cast<T>(loss / n);
  return res;
}

}  // namespace spcnn
