#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "spcnn/errors.hpp"
#include "spcnn/image.hpp"

namespace spcnn {

namespace detail {

// Skips whitespace and '#' comments between PPM header tokens.
inline int ppm_token(std::istream& in, const std::string& path) {
  for (;;) {
    int ch = in.peek();
    if (ch == EOF) throw DataError(path + ": malformed ppm header (unexpected end of file)");
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (std::isspace(ch)) {
      in.get();
      continue;
    }
    break;
  }
  int value = 0;
  if (!(in >> value) || value < 0)
    throw DataError(path + ": malformed ppm header (expected non-negative integer)");
  return value;
}

}  // namespace detail

inline RasterImage load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '6') throw DataError(path + ": not a binary ppm (P6) file");
  const int w = detail::ppm_token(in, path);
  const int h = detail::ppm_token(in, path);
  const int maxval = detail::ppm_token(in, path);
  if (w < 1 || h < 1) throw DataError(path + ": malformed ppm header (zero-sized image)");
  if (maxval != 255) throw DataError(path + ": unsupported ppm maxval " + std::to_string(maxval));
  in.get();  // single whitespace byte after maxval

  RasterImage img = make_image(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw DataError(path + ": truncated ppm payload (" + std::to_string(in.gcount()) + " of " +
                    std::to_string(img.pixels.size()) + " bytes)");
  return img;
}

inline void save_ppm(const std::string& path, const RasterImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("short write to " + path);
}

}  // namespace spcnn
