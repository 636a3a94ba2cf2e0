#ifndef SRN_IMAGE_HPP_
#define SRN_IMAGE_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "srn/tensor.hpp"

namespace srn {

/// Axis-aligned window copy out of an (H, W, C) image.
template <typename Scalar>
Tensor<Scalar> crop(const Tensor<Scalar>& img, int top, int left, int ch, int cw) {
  if (img.rank() != 3) throw ShapeError("crop: image must be (H, W, C)");
  const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
  if (ch <= 0 || cw <= 0 || top < 0 || left < 0 || top + ch > h || left + cw > w)
    throw ShapeError("crop: window " + std::to_string(ch) + "x" + std::to_string(cw) + "@(" +
                     std::to_string(top) + "," + std::to_string(left) + ") outside " +
                     std::to_string(h) + "x" + std::to_string(w));
  Tensor<Scalar> out({ch, cw, c});
  for (int i = 0; i < ch; ++i)
    for (int j = 0; j < cw; ++j)
      for (int k = 0; k < c; ++k) out(i, j, k) = img(top + i, left + j, k);
  return out;
}

/// Bilinear resample to (oh, ow). Same extents return an exact copy.
/// Sample grid uses the half-pixel convention so corners stay aligned.
template <typename Scalar>
Tensor<Scalar> bilinear_resize(const Tensor<Scalar>& img, int oh, int ow) {
  if (img.rank() != 3) throw ShapeError("bilinear_resize: image must be (H, W, C)");
  const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
  if (oh <= 0 || ow <= 0) throw ShapeError("bilinear_resize: output extents must be positive");
  if (oh == h && ow == w) return img;
  Tensor<Scalar> out({oh, ow, c});
  const double sy = static_cast<double>(h) / oh;
  const double sx = static_cast<double>(w) / ow;
  for (int i = 0; i < oh; ++i) {
    const double fy = std::clamp((i + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int j = 0; j < ow; ++j) {
      const double fx = std::clamp((j + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      for (int k = 0; k < c; ++k) {
        const double v00 = img(y0, x0, k), v01 = img(y0, x1, k);
        const double v10 = img(y1, x0, k), v11 = img(y1, x1, k);
        const double top = v00 + (v01 - v00) * wx;
        const double bot = v10 + (v11 - v10) * wx;
        out(i, j, k) = static_cast<Scalar>(top + (bot - top) * wy);
      }
    }
  }
  return out;
}

/// Min-max scale a single-channel map to [0, 255] integers. A constant map
/// becomes mid-gray.
template <typename Scalar>
std::vector<int> gray_levels(const Tensor<Scalar>& map) {
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < map.size(); ++i) {
    lo = std::min(lo, static_cast<double>(map[i]));
    hi = std::max(hi, static_cast<double>(map[i]));
  }
  std::vector<int> px(static_cast<std::size_t>(map.size()));
  if (hi - lo <= 0.0) {
    std::fill(px.begin(), px.end(), 128);
    return px;
  }
  for (int i = 0; i < map.size(); ++i) {
    const double t = (static_cast<double>(map[i]) - lo) / (hi - lo);
    px[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(t * 255.0));
  }
  return px;
}

/// Portable graymap writers. P2 is ASCII, P5 binary; both 8-bit.
template <typename Scalar>
void write_pgm(const std::string& path, const Tensor<Scalar>& map, bool binary) {
  if (map.rank() != 2 && !(map.rank() == 3 && map.dim(2) == 1))
    throw ShapeError("write_pgm: map must be (H, W) or (H, W, 1)");
  const int h = map.dim(0), w = map.dim(1);
  const std::vector<int> px = gray_levels(map);
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw DataError("cannot write " + path);
  os << (binary ? "P5" : "P2") << "\n" << w << " " << h << "\n255\n";
  if (binary) {
    std::string bytes(px.size(), '\0');
    for (std::size_t i = 0; i < px.size(); ++i) bytes[i] = static_cast<char>(px[i]);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  } else {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) os << (j ? " " : "") << px[static_cast<std::size_t>(i) * w + j];
      os << "\n";
    }
  }
  if (!os) throw DataError("write failed: " + path);
}

/// Shortest round-trip decimal for a value (so raw exports re-parse exactly).
template <typename Scalar>
std::string exact_decimal(Scalar v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), static_cast<double>(v));
  if (ec != std::errc()) throw DataError("exact_decimal: conversion failed");
  return std::string(buf, end);
}

/// Raw map dump: one header line "h w", then h lines of w exact decimals.
template <typename Scalar>
void write_raw_map(std::ostream& os, const Tensor<Scalar>& map) {
  if (map.rank() != 2 && !(map.rank() == 3 && map.dim(2) == 1))
    throw ShapeError("write_raw_map: map must be (H, W) or (H, W, 1)");
  const int h = map.dim(0), w = map.dim(1);
  os << h << " " << w << "\n";
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) os << (j ? " " : "") << exact_decimal(map[i * w + j]);
    os << "\n";
  }
}

template <typename Scalar>
Tensor<Scalar> read_raw_map(std::istream& is) {
  int h = 0, w = 0;
  if (!(is >> h >> w) || h <= 0 || w <= 0) throw DataError("read_raw_map: bad header");
  Tensor<Scalar> map({h, w});
  for (int i = 0; i < map.size(); ++i) {
    double v;
    if (!(is >> v)) throw DataError("read_raw_map: truncated at value " + std::to_string(i));
    map[i] = static_cast<Scalar>(v);
  }
  return map;
}

}  // namespace srn

#endif  // SRN_IMAGE_HPP_
