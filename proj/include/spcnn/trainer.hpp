#pragma once

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spcnn/checkpoint.hpp"
#include "spcnn/dataset.hpp"
#include "spcnn/errors.hpp"
#include "spcnn/kernels.hpp"
#include "spcnn/net.hpp"
#include "spcnn/optimizer.hpp"
#include "spcnn/pyramid.hpp"
#include "spcnn/rng.hpp"

namespace spcnn {

// Deterministic epoch-wise batching: each epoch is an independent
// permutation seeded by (seed, epoch); batches are taken sequentially and
// the final short batch of an epoch is kept. Training length is bounded by
// iterations, not epochs.
inline std::vector<int64_t> make_batch(int64_t n, int batch_size, uint64_t seed,
                                       int64_t iteration) {
  if (n < 1) throw ConfigError("make_batch: empty training set");
  if (batch_size < 1) throw ConfigError("make_batch: batch size must be >= 1");
  const int64_t per_epoch = (n + batch_size - 1) / batch_size;
  const int64_t epoch = iteration / per_epoch;
  const int64_t slot = iteration % per_epoch;
  std::vector<int64_t> perm(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  Rng rng(mix64(seed, 0x9cf1a2b3u + static_cast<uint64_t>(epoch)));
  rng.shuffle(perm);
  const int64_t lo = slot * batch_size;
  const int64_t hi = std::min<int64_t>(lo + batch_size, n);
  return std::vector<int64_t>(perm.begin() + lo, perm.begin() + hi);
}

struct TrainData {
  const DatasetManifest* manifest = nullptr;
  MeanImage mean;
  int canonical = 64;
};

struct TrainCallbacks {
  std::function<void(int64_t iter, float loss, float lr)> on_iteration;
  std::function<void(int64_t iter, double batch_accuracy)> on_accuracy;
  std::function<void(int64_t iter, const Checkpoint&)> on_snapshot;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<std::string> metric_lines;  // "iter <n> loss <f> lr <f>"
};

namespace detail {

// Preprocessed samples are cached in memory when the whole train split
// fits a fixed budget; preprocessing is deterministic so the cache cannot
// change results.
class SampleCache {
 public:
  SampleCache(const DatasetManifest& m, const std::vector<size_t>& train_entries,
              const MeanImage& mean, int canonical, int levels)
      : manifest_(m), entries_(train_entries), mean_(mean), canonical_(canonical), levels_(levels) {
    const int64_t per_sample_bytes =
        static_cast<int64_t>(canonical) * canonical * 3 * 2 * static_cast<int64_t>(sizeof(float));
    caching_ = static_cast<int64_t>(entries_.size()) * per_sample_bytes <= (int64_t{512} << 20);
    if (caching_) cache_.resize(entries_.size());
  }

  const std::vector<Tensor>& regions(int64_t train_idx) {
    if (caching_) {
      auto& slot = cache_[static_cast<size_t>(train_idx)];
      if (!slot) slot = load(train_idx);
      return *slot;
    }
    scratch_ = load(train_idx);
    return *scratch_;
  }

  int label(int64_t train_idx) const {
    return manifest_.entries[entries_[static_cast<size_t>(train_idx)]].label;
  }

 private:
  std::optional<std::vector<Tensor>> load(int64_t train_idx) const {
    const SampleEntry& e = manifest_.entries[entries_[static_cast<size_t>(train_idx)]];
    const RasterImage img = load_image(resolve_path(manifest_, e.path));
    return preprocess_image(img, canonical_, levels_, mean_);
  }

  const DatasetManifest& manifest_;
  std::vector<size_t> entries_;
  const MeanImage& mean_;
  int canonical_;
  int levels_;
  bool caching_ = false;
  std::vector<std::optional<std::vector<Tensor>>> cache_;
  std::optional<std::vector<Tensor>> scratch_;
};

}  // namespace detail

/// Mini-batch SGD over the train split: load batch, pyramid-preprocess,
/// forward, softmax cross-entropy, backward, sgd_step. Reproducible from
/// the config seed. A non-finite loss or gradient aborts with NumericError;
/// snapshots already emitted stay on disk.
inline TrainResult train(const NetworkSpec& spec, NetworkState state, const TrainData& data,
                         const TrainConfig& cfg, const TrainCallbacks& cb = {}) {
  validate_spec(spec);
  cfg.validate();
  if (!data.manifest) throw ConfigError("train: no dataset");
  const DatasetManifest& manifest = *data.manifest;
  if (static_cast<int>(manifest.class_names.size()) != spec.class_count)
    throw ConfigError("train: manifest has " + std::to_string(manifest.class_names.size()) +
                      " classes, network expects " + std::to_string(spec.class_count));
  if (data.mean.size() != data.canonical)
    throw ConfigError("train: mean image size does not match canonical size");
  if (spec.streams[0].input_size != data.canonical)
    throw ConfigError("train: stream 0 input " + std::to_string(spec.streams[0].input_size) +
                      " != canonical size " + std::to_string(data.canonical));

  std::vector<size_t> train_entries;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const SampleEntry& e = manifest.entries[i];
    if (e.role != SplitRole::Train) continue;
    if (e.kind != SampleKind::Image)
      throw DataError("train: entry '" + e.path + "' is a video; videos are test-only");
    train_entries.push_back(i);
  }
  if (train_entries.empty()) throw ConfigError("train: training split is empty");

  detail::SampleCache cache(manifest, train_entries, data.mean, data.canonical,
                            spec.pyramid_levels);
  OptimizerState opt = make_optimizer_state(state.params);
  Rng dropout_rng(mix64(cfg.seed, 0xd50b0a11u));

  TrainResult result;
  result.metric_lines.reserve(static_cast<size_t>(cfg.iterations));

  auto make_checkpoint = [&](int64_t iteration) {
    Checkpoint ck;
    ck.spec = spec;
    ck.state = state;
    ck.momentum = opt.velocity;
    ck.iteration = static_cast<uint64_t>(iteration);
    ck.mean = data.mean;
    return ck;
  };

  const size_t stream_count = spec.streams.size();
  for (int64_t iter = 0; iter < cfg.iterations; ++iter) {
    const std::vector<int64_t> batch =
        make_batch(static_cast<int64_t>(train_entries.size()), cfg.batch_size, cfg.seed, iter);
    const int b = static_cast<int>(batch.size());

    std::vector<Tensor> region_batches(stream_count);
    for (size_t si = 0; si < stream_count; ++si) {
      const int s = spec.streams[si].input_size;
      region_batches[si] = Tensor({b, 3, s, s});
    }
    std::vector<int> labels(static_cast<size_t>(b));
    for (int r = 0; r < b; ++r) {
      const std::vector<Tensor>& regions = cache.regions(batch[static_cast<size_t>(r)]);
      for (size_t si = 0; si < stream_count; ++si) {
        Tensor& dst = region_batches[si];
        const int64_t seg = regions[si].size();
        std::copy(regions[si].data(), regions[si].data() + seg, dst.data() + seg * r);
      }
      labels[static_cast<size_t>(r)] = cache.label(batch[static_cast<size_t>(r)]);
    }

    ForwardCache fwd;
    const Tensor logits = forward(spec, state, region_batches, true, &dropout_rng, &fwd);
    const auto xent = softmax_xent(logits, labels);
    if (!std::isfinite(xent.loss))
      throw NumericError("train: non-finite loss at iteration " + std::to_string(iter));

    const ParamSet grads = backward(spec, state, fwd, xent.grad_logits);
    const float lr = lr_at(cfg, iter);
    sgd_step(state.params, grads, opt, cfg, lr);

    char line[96];
    std::snprintf(line, sizeof line, "iter %" PRId64 " loss %.6g lr %.6g", iter,
                  static_cast<double>(xent.loss), static_cast<double>(lr));
    result.metric_lines.emplace_back(line);
    if (cb.on_iteration) cb.on_iteration(iter, xent.loss, lr);

    const bool at_interval = cfg.snapshot_interval > 0 && (iter + 1) % cfg.snapshot_interval == 0;
    if ((at_interval || iter + 1 == cfg.iterations) && cb.on_accuracy) {
      int correct = 0;
      for (int r = 0; r < b; ++r) {
        int best = 0;
        for (int c = 1; c < spec.class_count; ++c)
          if (xent.probs.at2(r, c) > xent.probs.at2(r, best)) best = c;
        if (best == labels[static_cast<size_t>(r)]) ++correct;
      }
      cb.on_accuracy(iter + 1, static_cast<double>(correct) / b);
    }
    if (at_interval && iter + 1 < cfg.iterations && cb.on_snapshot)
      cb.on_snapshot(iter + 1, make_checkpoint(iter + 1));
  }

  result.checkpoint = make_checkpoint(cfg.iterations);
  return result;
}

}  // namespace spcnn
