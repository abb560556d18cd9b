#pragma once

#include <string>
#include <vector>

#include "spcnn/errors.hpp"
#include "spcnn/image.hpp"
#include "spcnn/tensor.hpp"

namespace spcnn {

/// One cell of the spatial pyramid: level l splits the image into a
/// 2^l x 2^l grid; level 0 is the whole image.
struct PyramidRegion {
  int level = 0;
  int grid_x = 0;
  int grid_y = 0;
  RasterImage crop;
};

/// Per-pixel, per-channel mean over the training split at canonical
/// resolution, stored as a float [3,S,S] tensor with values in [0,255].
struct MeanImage {
  Tensor values;
  int size() const { return values.empty() ? 0 : values.dim(1); }
};

struct RegionWindow {
  int off_x = 0;
  int off_y = 0;
};

inline int pyramid_region_count(int levels) {
  int total = 0, per_level = 1;
  for (int l = 0; l < levels; ++l, per_level *= 4) total += per_level;
  return total;  // (4^levels - 1) / 3
}

// Regions ordered level-ascending, then row-major within a level. Regions
// of one level tile the source exactly; dimensions must divide evenly.
inline std::vector<PyramidRegion> split_pyramid(const RasterImage& img, int levels) {
  if (levels < 1) throw ConfigError("split_pyramid: levels must be >= 1");
  const int grid_max = 1 << (levels - 1);
  if (img.width % grid_max != 0 || img.height % grid_max != 0)
    throw ConfigError("split_pyramid: image " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + " not divisible into a " +
                      std::to_string(grid_max) + "x" + std::to_string(grid_max) + " grid");

  std::vector<PyramidRegion> regions;
  regions.reserve(static_cast<size_t>(pyramid_region_count(levels)));
  for (int level = 0; level < levels; ++level) {
    const int grid = 1 << level;
    const int cw = img.width / grid;
    const int ch = img.height / grid;
    for (int gy = 0; gy < grid; ++gy)
      for (int gx = 0; gx < grid; ++gx) {
        PyramidRegion r;
        r.level = level;
        r.grid_x = gx;
        r.grid_y = gy;
        r.crop = make_image(cw, ch);
        for (int y = 0; y < ch; ++y) {
          const uint8_t* src = &img.pixels[((static_cast<size_t>(gy) * ch + y) * img.width +
                                            static_cast<size_t>(gx) * cw) *
                                           3];
          std::copy(src, src + static_cast<size_t>(cw) * 3,
                    &r.crop.pixels[static_cast<size_t>(y) * cw * 3]);
        }
        regions.push_back(std::move(r));
      }
  }
  return regions;
}

inline RegionWindow window_for(const PyramidRegion& r, int canonical) {
  const int cell = canonical >> r.level;
  return RegionWindow{r.grid_x * cell, r.grid_y * cell};
}

// out[c,y,x] = crop[c,y,x] - mean[c, y+off_y, x+off_x]; quadrant regions
// subtract the matching window of the mean image.
inline Tensor subtract_mean(const RasterImage& crop, const MeanImage& mean, RegionWindow win) {
  const int s = mean.size();
  if (s == 0) throw ConfigError("subtract_mean: empty mean image");
  if (win.off_x < 0 || win.off_y < 0 || win.off_x + crop.width > s || win.off_y + crop.height > s)
    throw ConfigError("subtract_mean: window " + std::to_string(win.off_x) + "," +
                      std::to_string(win.off_y) + " size " + std::to_string(crop.width) + "x" +
                      std::to_string(crop.height) + " outside mean image " + std::to_string(s) +
                      "x" + std::to_string(s));
  Tensor out({3, crop.height, crop.width});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < crop.height; ++y)
      for (int x = 0; x < crop.width; ++x)
        out[(static_cast<int64_t>(c) * crop.height + y) * crop.width + x] =
            static_cast<float>(crop.at(x, y, c)) -
            mean.values[(static_cast<int64_t>(c) * s + (y + win.off_y)) * s + (x + win.off_x)];
  return out;
}

/// Full preprocessing for one image: resize to canonical size, split into
/// pyramid regions, subtract the windowed mean. Returns one [3,h,w] tensor
/// per stream in stream order.
inline std::vector<Tensor> preprocess_image(const RasterImage& img, int canonical, int levels,
                                            const MeanImage& mean) {
  if (mean.size() != canonical)
    throw ConfigError("preprocess: mean image size " + std::to_string(mean.size()) +
                      " != canonical " + std::to_string(canonical));
  const RasterImage resized = resize_bilinear(img, canonical, canonical);
  const std::vector<PyramidRegion> regions = split_pyramid(resized, levels);
  std::vector<Tensor> out;
  out.reserve(regions.size());
  for (const PyramidRegion& r : regions) out.push_back(subtract_mean(r.crop, mean, window_for(r, canonical)));
  return out;
}

}  // namespace spcnn
