#pragma once

#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "spcnn/errors.hpp"
#include "spcnn/kernels.hpp"
#include "spcnn/rng.hpp"
#include "spcnn/tensor.hpp"

namespace spcnn {

enum class LayerKind { Conv, Relu, Pool };

struct LayerDesc {
  LayerKind kind = LayerKind::Relu;
  int channels = 0;  // conv output channels
  int kernel = 0;
  int stride = 1;
  int pad = 0;
};

inline LayerDesc conv_layer(int channels, int kernel, int stride, int pad) {
  return LayerDesc{LayerKind::Conv, channels, kernel, stride, pad};
}
inline LayerDesc relu_layer() { return LayerDesc{LayerKind::Relu, 0, 0, 1, 0}; }
inline LayerDesc pool_layer(int kernel, int stride) {
  return LayerDesc{LayerKind::Pool, 0, kernel, stride, 0};
}

/// One convolutional tower: the ordered conv/relu/pool descriptors applied
/// to a square input of the given size.
struct StreamSpec {
  int input_size = 0;
  std::vector<LayerDesc> layers;
};

/// The multi-stream architecture: one stream per pyramid region, fused by
/// flatten-and-concatenate into fc6.
struct NetworkSpec {
  int pyramid_levels = 2;
  std::vector<StreamSpec> streams;  // level-ascending, row-major grid order
  int fc6_width = 4096;
  int fc7_width = 4096;
  int class_count = 8;
  float dropout_rate = 0.5f;
  bool share_quadrant_weights = false;
};

struct LayerShape {
  std::string name;
  int channels = 0;
  int height = 0;
  int width = 0;
};

struct ShapeReport {
  std::vector<LayerShape> layers;  // entry 0 is the input
  int64_t flattened_width = 0;
};

inline ShapeReport infer_shapes(const StreamSpec& spec) {
  if (spec.input_size < 1) throw ConfigError("stream: input size must be >= 1");
  ShapeReport rep;
  int c = 3, h = spec.input_size, w = spec.input_size;
  rep.layers.push_back({"input", c, h, w});
  int conv_n = 0, pool_n = 0, relu_n = 0;
  for (const LayerDesc& d : spec.layers) {
    std::string name;
    switch (d.kind) {
      case LayerKind::Conv: {
        name = "conv" + std::to_string(++conv_n);
        if (h + 2 * d.pad < d.kernel || w + 2 * d.pad < d.kernel)
          throw ConfigError("stream layer " + name + ": input " + std::to_string(h) + "x" +
                            std::to_string(w) + " too small for kernel " + std::to_string(d.kernel) +
                            " pad " + std::to_string(d.pad));
        h = conv_out_size(h, d.kernel, d.stride, d.pad);
        w = conv_out_size(w, d.kernel, d.stride, d.pad);
        c = d.channels;
        break;
      }
      case LayerKind::Pool: {
        name = "pool" + std::to_string(++pool_n);
        if (d.kernel > h || d.kernel > w)
          throw ConfigError("stream layer " + name + ": kernel " + std::to_string(d.kernel) +
                            " exceeds input " + std::to_string(h) + "x" + std::to_string(w));
        h = pool_out_size(h, d.kernel, d.stride);
        w = pool_out_size(w, d.kernel, d.stride);
        break;
      }
      case LayerKind::Relu:
        name = "relu" + std::to_string(++relu_n);
        break;
    }
    if (h < 1 || w < 1)
      throw ConfigError("stream layer " + name + " collapses to " + std::to_string(h) + "x" +
                        std::to_string(w));
    rep.layers.push_back({name, c, h, w});
  }
  rep.flattened_width = static_cast<int64_t>(c) * h * w;
  return rep;
}

inline void validate_spec(const NetworkSpec& spec) {
  if (spec.pyramid_levels < 1) throw ConfigError("network: pyramid levels must be >= 1");
  int expected = 0, per_level = 1;
  for (int l = 0; l < spec.pyramid_levels; ++l, per_level *= 4) expected += per_level;
  if (static_cast<int>(spec.streams.size()) != expected)
    throw ConfigError("network: " + std::to_string(spec.streams.size()) + " streams for " +
                      std::to_string(spec.pyramid_levels) + " pyramid levels (expected " +
                      std::to_string(expected) + ")");
  if (spec.class_count < 2) throw ConfigError("network: class count must be >= 2");
  if (spec.fc6_width < 1 || spec.fc7_width < 1) throw ConfigError("network: fc widths must be >= 1");
  if (spec.dropout_rate < 0.0f || spec.dropout_rate >= 1.0f)
    throw ConfigError("network: dropout rate outside [0,1)");
  for (const StreamSpec& s : spec.streams) infer_shapes(s);
}

/// Sum of per-stream flattened widths; the width of the fc6 input.
inline int64_t concat_width(const NetworkSpec& spec) {
  int64_t total = 0;
  for (const StreamSpec& s : spec.streams) total += infer_shapes(s).flattened_width;
  return total;
}

inline int pyramid_level_of_stream(int stream_idx) {
  int level = 0, first = 0, per_level = 1;
  while (stream_idx >= first + per_level) {
    first += per_level;
    per_level *= 4;
    ++level;
  }
  return level;
}

// Parameter towers. Without sharing every stream owns a tower; with
// sharing all streams of one pyramid level use that level's tower.
inline int tower_count(const NetworkSpec& spec) {
  return spec.share_quadrant_weights ? spec.pyramid_levels
                                     : static_cast<int>(spec.streams.size());
}

inline int tower_of_stream(const NetworkSpec& spec, int stream_idx) {
  return spec.share_quadrant_weights ? pyramid_level_of_stream(stream_idx) : stream_idx;
}

// Representative stream for a tower (the one whose geometry sizes it).
inline int stream_of_tower(const NetworkSpec& spec, int tower_idx) {
  if (!spec.share_quadrant_weights) return tower_idx;
  int first = 0, per_level = 1;
  for (int l = 0; l < tower_idx; ++l) {
    first += per_level;
    per_level *= 4;
  }
  return first;
}

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct ParamSet {
  std::vector<NamedTensor> tensors;

  Tensor* find(const std::string& name) {
    for (NamedTensor& t : tensors)
      if (t.name == name) return &t.value;
    return nullptr;
  }
  const Tensor* find(const std::string& name) const {
    for (const NamedTensor& t : tensors)
      if (t.name == name) return &t.value;
    return nullptr;
  }
  Tensor& get(const std::string& name) {
    Tensor* t = find(name);
    if (!t) throw StateError("parameter set has no tensor named " + name);
    return *t;
  }
  const Tensor& get(const std::string& name) const {
    const Tensor* t = find(name);
    if (!t) throw StateError("parameter set has no tensor named " + name);
    return *t;
  }
  int64_t total_elements() const {
    int64_t n = 0;
    for (const NamedTensor& t : tensors) n += t.value.size();
    return n;
  }
  bool all_finite() const {
    for (const NamedTensor& t : tensors)
      if (!t.value.all_finite()) return false;
    return true;
  }
};

inline ParamSet zeros_like(const ParamSet& p) {
  ParamSet out;
  out.tensors.reserve(p.tensors.size());
  for (const NamedTensor& t : p.tensors) out.tensors.push_back({t.name, Tensor(t.value.shape())});
  return out;
}

/// All learnable tensors plus the RNG seed of record.
struct NetworkState {
  ParamSet params;
  uint64_t seed = 0;
};

namespace detail {

struct ConvSlot {
  int layer_index = 0;  // position in StreamSpec::layers
  std::string weight_name;
  std::string bias_name;
  ConvParams geometry;  // weights/bias left empty; filled from the ParamSet
};

// Conv layers of one tower with their parameter names and geometry.
inline std::vector<ConvSlot> tower_convs(const NetworkSpec& spec, int tower_idx) {
  const StreamSpec& s = spec.streams[static_cast<size_t>(stream_of_tower(spec, tower_idx))];
  std::vector<ConvSlot> slots;
  int in_c = 3, conv_n = 0;
  for (size_t i = 0; i < s.layers.size(); ++i) {
    const LayerDesc& d = s.layers[i];
    if (d.kind != LayerKind::Conv) continue;
    ++conv_n;
    ConvSlot slot;
    slot.layer_index = static_cast<int>(i);
    const std::string base = "t" + std::to_string(tower_idx) + ".conv" + std::to_string(conv_n);
    slot.weight_name = base + ".w";
    slot.bias_name = base + ".b";
    slot.geometry.kernel = d.kernel;
    slot.geometry.stride = d.stride;
    slot.geometry.pad = d.pad;
    slot.geometry.in_channels = in_c;
    slot.geometry.out_channels = d.channels;
    slots.push_back(std::move(slot));
    in_c = d.channels;
  }
  return slots;
}

}  // namespace detail

inline int64_t param_count(const NetworkSpec& spec) {
  validate_spec(spec);
  int64_t n = 0;
  for (int t = 0; t < tower_count(spec); ++t)
    for (const auto& slot : detail::tower_convs(spec, t))
      n += static_cast<int64_t>(slot.geometry.out_channels) * slot.geometry.in_channels *
               slot.geometry.kernel * slot.geometry.kernel +
           slot.geometry.out_channels;
  const int64_t d = concat_width(spec);
  n += d * spec.fc6_width + spec.fc6_width;
  n += static_cast<int64_t>(spec.fc6_width) * spec.fc7_width + spec.fc7_width;
  n += static_cast<int64_t>(spec.fc7_width) * spec.class_count + spec.class_count;
  return n;
}

/// He-scaled Gaussian weights (std = sqrt(2/fanIn)), zero biases,
/// fully determined by the seed.
inline NetworkState init_params(const NetworkSpec& spec, uint64_t seed) {
  validate_spec(spec);
  NetworkState state;
  state.seed = seed;
  Rng rng(mix64(seed, 0x5bd1e995));

  auto add_gaussian = [&](const std::string& name, std::vector<int> shape, int fan_in) {
    Tensor t(std::move(shape));
    const double stddev = std::sqrt(2.0 / fan_in);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal() * stddev);
    state.params.tensors.push_back({name, std::move(t)});
  };
  auto add_zeros = [&](const std::string& name, std::vector<int> shape) {
    state.params.tensors.push_back({name, Tensor(std::move(shape))});
  };

  for (int t = 0; t < tower_count(spec); ++t)
    for (const auto& slot : detail::tower_convs(spec, t)) {
      const auto& g = slot.geometry;
      add_gaussian(slot.weight_name, {g.out_channels, g.in_channels, g.kernel, g.kernel},
                   g.in_channels * g.kernel * g.kernel);
      add_zeros(slot.bias_name, {g.out_channels});
    }
  const int d = static_cast<int>(concat_width(spec));
  add_gaussian("fc6.w", {d, spec.fc6_width}, d);
  add_zeros("fc6.b", {spec.fc6_width});
  add_gaussian("fc7.w", {spec.fc6_width, spec.fc7_width}, spec.fc6_width);
  add_zeros("fc7.b", {spec.fc7_width});
  add_gaussian("fc8.w", {spec.fc7_width, spec.class_count}, spec.fc7_width);
  add_zeros("fc8.b", {spec.class_count});
  return state;
}

/// Flatten every stream output (channel-major, row-major) and join the
/// segments in stream order into one [N, D] matrix.
inline Tensor concat_forward(const std::vector<Tensor>& stream_outputs) {
  if (stream_outputs.empty()) throw ConfigError("concat: no stream outputs");
  const int n = stream_outputs[0].dim(0);
  int64_t width = 0;
  for (const Tensor& t : stream_outputs) {
    if (t.dim(0) != n)
      throw ConfigError("concat: batch mismatch, " + std::to_string(t.dim(0)) + " vs " +
                        std::to_string(n));
    width += t.size() / n;
  }
  Tensor out({n, static_cast<int>(width)});
  for (int s = 0; s < n; ++s) {
    float* dst = &out.at2(s, 0);
    for (const Tensor& t : stream_outputs) {
      const int64_t seg = t.size() / n;
      const float* src = t.data() + s * seg;
      std::copy(src, src + seg, dst);
      dst += seg;
    }
  }
  return out;
}

/// Exact inverse routing of concat_forward given the per-stream shapes.
inline std::vector<Tensor> concat_backward(const Tensor& grad,
                                           const std::vector<std::vector<int>>& stream_shapes) {
  const int n = grad.dim(0);
  int64_t width = 0;
  for (const auto& shape : stream_shapes) width += Tensor::numel(shape) / shape[0];
  if (grad.dim(1) != width)
    throw ConfigError("concat backward: width " + std::to_string(grad.dim(1)) +
                      " != concat width " + std::to_string(width));
  std::vector<Tensor> out;
  out.reserve(stream_shapes.size());
  for (const auto& shape : stream_shapes) {
    if (shape[0] != n) throw ConfigError("concat backward: batch mismatch");
    out.emplace_back(shape);
  }
  for (int s = 0; s < n; ++s) {
    const float* src = &grad.at2(s, 0);
    for (Tensor& t : out) {
      const int64_t seg = t.size() / n;
      std::copy(src, src + seg, t.data() + s * seg);
      src += seg;
    }
  }
  return out;
}

struct StreamCache {
  std::vector<Tensor> acts;  // acts[i] = input of layer i; back entry = tower output
  std::vector<PoolState> pool_states;
};

struct ForwardCache {
  bool valid = false;
  bool training = false;
  std::vector<StreamCache> streams;
  std::vector<std::vector<int>> stream_out_shapes;
  Tensor concat;  // fc6 input
  Tensor z6, d6;  // fc6 linear output; fc6 relu+dropout output (fc7 input)
  Tensor z7, d7;
  DropoutMask m6, m7;
  Tensor logits;
};

/// Per-stream towers, concat, fc6+ReLU(+dropout), fc7+ReLU(+dropout), fc8.
/// In training mode a dropout rng must be supplied when dropout_rate > 0.
inline Tensor forward(const NetworkSpec& spec, const NetworkState& state,
                      const std::vector<Tensor>& region_batches, bool training,
                      Rng* dropout_rng = nullptr, ForwardCache* cache = nullptr) {
  if (region_batches.size() != spec.streams.size())
    throw ConfigError("forward: " + std::to_string(region_batches.size()) + " region batches for " +
                      std::to_string(spec.streams.size()) + " streams");
  const int n = region_batches.empty() ? 0 : region_batches[0].dim(0);
  for (size_t i = 0; i < region_batches.size(); ++i) {
    const Tensor& rb = region_batches[i];
    const int s = spec.streams[i].input_size;
    if (rb.rank() != 4 || rb.dim(1) != 3 || rb.dim(2) != s || rb.dim(3) != s)
      throw ConfigError("forward: stream " + std::to_string(i) + " expects [N,3," +
                        std::to_string(s) + "," + std::to_string(s) + "], got " + rb.shape_str());
    if (rb.dim(0) != n) throw ConfigError("forward: inconsistent batch dimension");
  }
  if (training && spec.dropout_rate > 0.0f && dropout_rng == nullptr)
    throw ConfigError("forward: training mode with dropout requires an rng");

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  c.training = training;
  c.streams.resize(spec.streams.size());

  std::vector<Tensor> tower_outputs(spec.streams.size());
  for (size_t si = 0; si < spec.streams.size(); ++si) {
    const StreamSpec& stream = spec.streams[si];
    const auto slots = detail::tower_convs(spec, tower_of_stream(spec, static_cast<int>(si)));
    StreamCache& sc = c.streams[si];
    sc.pool_states.resize(stream.layers.size());
    Tensor x = region_batches[si];
    size_t conv_i = 0;
    for (size_t li = 0; li < stream.layers.size(); ++li) {
      sc.acts.push_back(x);
      const LayerDesc& d = stream.layers[li];
      switch (d.kind) {
        case LayerKind::Conv: {
          const auto& slot = slots[conv_i++];
          ConvParams p = slot.geometry;
          p.weights = state.params.get(slot.weight_name);
          p.bias = state.params.get(slot.bias_name);
          x = conv2d_forward(x, p);
          break;
        }
        case LayerKind::Relu:
          x = relu_forward(x);
          break;
        case LayerKind::Pool:
          x = maxpool_forward(x, PoolParams{d.kernel, d.stride}, sc.pool_states[li]);
          break;
      }
    }
    sc.acts.push_back(x);
    c.stream_out_shapes.push_back(x.shape());
    tower_outputs[si] = std::move(x);
  }

  c.concat = concat_forward(tower_outputs);
  c.z6 = linear_forward(c.concat, state.params.get("fc6.w"), state.params.get("fc6.b"));
  Tensor a6 = relu_forward(c.z6);
  Rng dummy(0);
  c.d6 = dropout_forward(a6, spec.dropout_rate, dropout_rng ? *dropout_rng : dummy, training, c.m6);
  c.z7 = linear_forward(c.d6, state.params.get("fc7.w"), state.params.get("fc7.b"));
  Tensor a7 = relu_forward(c.z7);
  c.d7 = dropout_forward(a7, spec.dropout_rate, dropout_rng ? *dropout_rng : dummy, training, c.m7);
  c.logits = linear_forward(c.d7, state.params.get("fc8.w"), state.params.get("fc8.b"));
  c.valid = true;
  return c.logits;
}

/// Gradients for every learnable tensor, by reverse traversal through the
/// fc stack, the concat split, and each stream tower.
inline ParamSet backward(const NetworkSpec& spec, const NetworkState& state,
                         const ForwardCache& cache, const Tensor& grad_logits) {
  if (!cache.valid) throw StateError("backward: cache not produced by a forward call");
  if (cache.streams.size() != spec.streams.size())
    throw StateError("backward: cache stream count does not match network");
  if (grad_logits.shape() != cache.logits.shape())
    throw StateError("backward: gradient shape " + grad_logits.shape_str() +
                     " does not match cached logits " + cache.logits.shape_str());

  ParamSet grads = zeros_like(state.params);

  auto fc8 = linear_backward(cache.d7, state.params.get("fc8.w"), grad_logits);
  grads.get("fc8.w") = std::move(fc8.weights);
  grads.get("fc8.b") = std::move(fc8.bias);
  Tensor g = dropout_backward(cache.m7, fc8.input);
  g = relu_backward(cache.z7, g);

  auto fc7 = linear_backward(cache.d6, state.params.get("fc7.w"), g);
  grads.get("fc7.w") = std::move(fc7.weights);
  grads.get("fc7.b") = std::move(fc7.bias);
  g = dropout_backward(cache.m6, fc7.input);
  g = relu_backward(cache.z6, g);

  auto fc6 = linear_backward(cache.concat, state.params.get("fc6.w"), g);
  grads.get("fc6.w") = std::move(fc6.weights);
  grads.get("fc6.b") = std::move(fc6.bias);

  std::vector<Tensor> stream_grads = concat_backward(fc6.input, cache.stream_out_shapes);

  for (size_t si = 0; si < spec.streams.size(); ++si) {
    const StreamSpec& stream = spec.streams[si];
    const auto slots = detail::tower_convs(spec, tower_of_stream(spec, static_cast<int>(si)));
    const StreamCache& sc = cache.streams[si];
    Tensor gx = std::move(stream_grads[si]);
    size_t conv_i = slots.size();
    for (size_t li = stream.layers.size(); li-- > 0;) {
      const LayerDesc& d = stream.layers[li];
      switch (d.kind) {
        case LayerKind::Conv: {
          const auto& slot = slots[--conv_i];
          ConvParams p = slot.geometry;
          p.weights = state.params.get(slot.weight_name);
          p.bias = state.params.get(slot.bias_name);
          auto cg = conv2d_backward(sc.acts[li], p, gx);
          Tensor& gw = grads.get(slot.weight_name);
          Tensor& gb = grads.get(slot.bias_name);
          for (int64_t i = 0; i < gw.size(); ++i) gw[i] += cg.weights[i];
          for (int64_t i = 0; i < gb.size(); ++i) gb[i] += cg.bias[i];
          gx = std::move(cg.input);
          break;
        }
        case LayerKind::Relu:
          gx = relu_backward(sc.acts[li], gx);
          break;
        case LayerKind::Pool:
          gx = maxpool_backward(sc.pool_states[li], gx);
          break;
      }
    }
  }
  return grads;
}

// Canonical text form of a NetworkSpec; used in checkpoints and parseable
// from any language. Round-trips exactly.
inline std::string spec_to_text(const NetworkSpec& spec) {
  std::ostringstream os;
  os << "spcnn_spec_v1\n";
  os << "pyramid_levels " << spec.pyramid_levels << "\n";
  os << "class_count " << spec.class_count << "\n";
  os << "fc6 " << spec.fc6_width << "\n";
  os << "fc7 " << spec.fc7_width << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(spec.dropout_rate));
  os << "dropout " << buf << "\n";
  os << "share_quadrant_weights " << (spec.share_quadrant_weights ? 1 : 0) << "\n";
  os << "streams " << spec.streams.size() << "\n";
  for (size_t i = 0; i < spec.streams.size(); ++i) {
    const StreamSpec& s = spec.streams[i];
    os << "stream " << i << " input " << s.input_size << "\n";
    for (const LayerDesc& d : s.layers) {
      switch (d.kind) {
        case LayerKind::Conv:
          os << "conv " << d.channels << " " << d.kernel << " " << d.stride << " " << d.pad << "\n";
          break;
        case LayerKind::Relu:
          os << "relu\n";
          break;
        case LayerKind::Pool:
          os << "pool " << d.kernel << " " << d.stride << "\n";
          break;
      }
    }
    os << "end\n";
  }
  return os.str();
}

inline NetworkSpec spec_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto next = [&]() -> std::string {
    if (!std::getline(in, line)) throw ConfigError("network spec text: unexpected end");
    return line;
  };
  if (next() != "spcnn_spec_v1") throw ConfigError("network spec text: bad header");

  NetworkSpec spec;
  spec.streams.clear();
  size_t stream_count = 0;
  {
    std::istringstream ls;
    auto scan = [&](const std::string& key) -> std::istringstream& {
      ls = std::istringstream(next());
      std::string k;
      ls >> k;
      if (k != key) throw ConfigError("network spec text: expected '" + key + "', got '" + k + "'");
      return ls;
    };
    scan("pyramid_levels") >> spec.pyramid_levels;
    scan("class_count") >> spec.class_count;
    scan("fc6") >> spec.fc6_width;
    scan("fc7") >> spec.fc7_width;
    scan("dropout") >> spec.dropout_rate;
    int share = 0;
    scan("share_quadrant_weights") >> share;
    spec.share_quadrant_weights = share != 0;
    scan("streams") >> stream_count;
  }
  for (size_t i = 0; i < stream_count; ++i) {
    std::istringstream hs(next());
    std::string kw;
    size_t idx = 0;
    std::string input_kw;
    StreamSpec s;
    hs >> kw >> idx >> input_kw >> s.input_size;
    if (kw != "stream" || idx != i || input_kw != "input")
      throw ConfigError("network spec text: malformed stream header '" + line + "'");
    for (;;) {
      std::istringstream lsr(next());
      std::string op;
      lsr >> op;
      if (op == "end") break;
      if (op == "conv") {
        int ch = 0, k = 0, st = 0, pad = 0;
        if (!(lsr >> ch >> k >> st >> pad))
          throw ConfigError("network spec text: malformed conv line '" + line + "'");
        s.layers.push_back(conv_layer(ch, k, st, pad));
      } else if (op == "relu") {
        s.layers.push_back(relu_layer());
      } else if (op == "pool") {
        int k = 0, st = 0;
        if (!(lsr >> k >> st))
          throw ConfigError("network spec text: malformed pool line '" + line + "'");
        s.layers.push_back(pool_layer(k, st));
      } else {
        throw ConfigError("network spec text: unknown layer '" + op + "'");
      }
    }
    spec.streams.push_back(std::move(s));
  }
  validate_spec(spec);
  return spec;
}

}  // namespace spcnn
