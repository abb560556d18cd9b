#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "spcnn/errors.hpp"
#include "spcnn/tensor.hpp"

namespace spcnn {

/// 8-bit RGB raster, interleaved, row-major.
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<uint8_t> pixels;

  uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const RasterImage& o) const {
    return width == o.width && height == o.height && channels == o.channels && pixels == o.pixels;
  }
};

inline RasterImage make_image(int w, int h, uint8_t fill = 0) {
  RasterImage img;
  img.width = w;
  img.height = h;
  img.pixels.assign(static_cast<size_t>(w) * h * 3, fill);
  return img;
}

// Bilinear resize, half-pixel-center alignment, round-half-up on write-back.
// Identity target sizes return the input untouched.
inline RasterImage resize_bilinear(const RasterImage& src, int target_w, int target_h) {
  if (target_w < 1 || target_h < 1)
    throw ConfigError("resize: target size " + std::to_string(target_w) + "x" +
                      std::to_string(target_h) + " must be positive");
  if (src.width == target_w && src.height == target_h) return src;

  RasterImage out = make_image(target_w, target_h);
  const double sx_scale = static_cast<double>(src.width) / target_w;
  const double sy_scale = static_cast<double>(src.height) / target_h;
  for (int y = 0; y < target_h; ++y) {
    double sy = (y + 0.5) * sy_scale - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < target_w; ++x) {
      double sx = (x + 0.5) * sx_scale - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double fx = sx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - fx) * src.at(x0, y0, c) + fx * src.at(x1, y0, c);
        const double bot = (1.0 - fx) * src.at(x0, y1, c) + fx * src.at(x1, y1, c);
        const double v = (1.0 - fy) * top + fy * bot;
        out.at(x, y, c) = static_cast<uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

/// Image as a float [3,H,W] tensor with raw 0..255 values.
inline Tensor image_to_chw(const RasterImage& img) {
  Tensor t({3, img.height, img.width});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        t[(static_cast<int64_t>(c) * img.height + y) * img.width + x] =
            static_cast<float>(img.at(x, y, c));
  return t;
}

}  // namespace spcnn
