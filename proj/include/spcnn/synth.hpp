#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "spcnn/dataset.hpp"
#include "spcnn/errors.hpp"
#include "spcnn/image.hpp"
#include "spcnn/ppm.hpp"
#include "spcnn/rng.hpp"

namespace spcnn {

// Synthetic quadrant-sensitive dataset.
//
// Classes 0 and 1 ("stripe_vh", "stripe_hv") are the designated ambiguous
// pair: both place fine vertical/horizontal stripe textures in the four
// quadrants, in swapped arrangements. The stripes have period size/8, so
// any size/8-pixel block averages to the same mid gray: downsampling the
// whole image to 8x8 makes the two classes pixel-identical, while each
// quadrant at native resolution is trivially separable by stripe
// orientation. Remaining classes are solid hues with per-quadrant shading
// and are easy at any resolution.
struct SynthConfig {
  int class_count = 8;
  int samples_per_class = 50;  // train samples; test adds max(2, n/5) per class
  int canonical_size = 64;
  uint64_t seed = 1;
  int noise = 8;  // max per-pixel uniform perturbation, 0 = exact class image
};

namespace detail {

inline void hsv_to_rgb(double h, double s, double v, uint8_t rgb[3]) {
  const double c = v * s;
  const double hh = h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hh, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hh < 1)
    r = c, g = x;
  else if (hh < 2)
    r = x, g = c;
  else if (hh < 3)
    g = c, b = x;
  else if (hh < 4)
    g = x, b = c;
  else if (hh < 5)
    r = x, b = c;
  else
    r = c, b = x;
  const double m = v - c;
  rgb[0] = static_cast<uint8_t>(std::lround((r + m) * 255.0));
  rgb[1] = static_cast<uint8_t>(std::lround((g + m) * 255.0));
  rgb[2] = static_cast<uint8_t>(std::lround((b + m) * 255.0));
}

// Quadrant order TL, TR, BL, BR. true = vertical stripes.
inline const bool* stripe_arrangement(int cls) {
  static const bool vh[4] = {true, false, false, true};
  static const bool hv[4] = {false, true, true, false};
  return cls == 0 ? vh : hv;
}

inline RasterImage synth_class_image(const SynthConfig& cfg, int cls) {
  const int s = cfg.canonical_size;
  const int q = s / 2;
  RasterImage img = make_image(s, s);
  if (cls < 2) {
    const bool* vertical = stripe_arrangement(cls);
    const int stripe = s / 16;  // half period; period = s/8 divides the 8x8-block size
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        const int quad = (y / q) * 2 + (x / q);
        const int phase = vertical[quad] ? (x % q) / stripe : (y % q) / stripe;
        const uint8_t v = (phase % 2 == 0) ? 255 : 0;
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
      }
    return img;
  }
  const double hue = 360.0 * (cls - 2) / std::max(1, cfg.class_count - 2);
  static const double kQuadValue[4] = {0.95, 0.8, 0.65, 0.5};
  for (int quad = 0; quad < 4; ++quad) {
    uint8_t rgb[3];
    hsv_to_rgb(hue, 0.75, kQuadValue[quad], rgb);
    const int x0 = (quad % 2) * q, y0 = (quad / 2) * q;
    for (int y = y0; y < y0 + q; ++y)
      for (int x = x0; x < x0 + q; ++x)
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = rgb[c];
  }
  return img;
}

inline void add_noise(RasterImage& img, Rng& rng, int noise) {
  if (noise == 0) return;
  for (uint8_t& p : img.pixels) {
    const int delta = static_cast<int>(rng.below(static_cast<uint64_t>(2 * noise + 1))) - noise;
    p = static_cast<uint8_t>(std::clamp(static_cast<int>(p) + delta, 0, 255));
  }
}

}  // namespace detail

inline std::vector<std::string> synth_class_names(int class_count) {
  std::vector<std::string> names = {"stripe_vh", "stripe_hv"};
  char buf[32];
  for (int c = 2; c < class_count; ++c) {
    std::snprintf(buf, sizeof buf, "solid_%02d", c);
    names.emplace_back(buf);
  }
  return names;
}

/// Writes the image tree plus two manifests: manifest.txt (train + test)
/// and manifest_train_as_test.txt (the train images re-listed as test, for
/// overfit evaluation). Returns the path of manifest.txt. Same seed, same
/// bytes.
inline std::string gen_synthetic(const SynthConfig& cfg, const std::string& out_dir) {
  if (cfg.class_count < 2 || cfg.class_count > 16)
    throw ConfigError("synth: class count " + std::to_string(cfg.class_count) + " outside [2,16]");
  if (cfg.samples_per_class < 1) throw ConfigError("synth: samples per class must be >= 1");
  if (cfg.canonical_size < 16 || cfg.canonical_size % 16 != 0)
    throw ConfigError("synth: canonical size must be a positive multiple of 16");
  if (cfg.noise < 0 || cfg.noise > 127) throw ConfigError("synth: noise must be in [0,127]");

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.class_names = synth_class_names(cfg.class_count);
  DatasetManifest train_as_test = manifest;

  const int test_per_class = std::max(2, cfg.samples_per_class / 5);
  char name[64];
  for (int cls = 0; cls < cfg.class_count; ++cls) {
    const RasterImage base = detail::synth_class_image(cfg, cls);
    fs::create_directories(fs::path(out_dir) / manifest.class_names[static_cast<size_t>(cls)]);
    for (int role = 0; role < 2; ++role) {
      const int count = role == 0 ? cfg.samples_per_class : test_per_class;
      for (int i = 0; i < count; ++i) {
        RasterImage img = base;
        Rng rng(mix64(cfg.seed, (static_cast<uint64_t>(cls) << 32) | (static_cast<uint64_t>(role) << 24) |
                                    static_cast<uint64_t>(i)));
        detail::add_noise(img, rng, cfg.noise);
        std::snprintf(name, sizeof name, "%s_%03d.ppm", role == 0 ? "train" : "test", i);
        const std::string rel = manifest.class_names[static_cast<size_t>(cls)] + "/" + name;
        save_ppm((fs::path(out_dir) / rel).string(), img);
        SampleEntry e;
        e.path = rel;
        e.label = cls;
        e.kind = SampleKind::Image;
        e.role = role == 0 ? SplitRole::Train : SplitRole::Test;
        manifest.entries.push_back(e);
        if (role == 0) {
          e.role = SplitRole::Test;
          train_as_test.entries.push_back(e);
        }
      }
    }
  }

  const std::string manifest_path = (fs::path(out_dir) / "manifest.txt").string();
  save_manifest(manifest_path, manifest);
  save_manifest((fs::path(out_dir) / "manifest_train_as_test.txt").string(), train_as_test);
  return manifest_path;
}

}  // namespace spcnn
