#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "tissueseg/image.hpp"

namespace tissueseg {

inline BinaryMask invert(const BinaryMask& mask) {
  BinaryMask out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) out[i] = mask[i] ? 0 : 1;
  return out;
}

namespace detail {

inline void check_morphology_params(int radius, int iterations) {
  if (radius < 1) throw Error(ErrorKind::InvalidParam, "radius must be >= 1");
  if (iterations < 1) throw Error(ErrorKind::InvalidParam, "iterations must be >= 1");
}

// One pass of a 1-D max (dilate) or min (erode) filter of half-width `radius`
// along rows (step = 1) or columns (step = width). Pixels outside the image
// count as background, so an erosion window that leaves the image yields 0.
inline void morph_pass(const std::vector<std::uint8_t>& src, std::vector<std::uint8_t>& dst,
                       int width, int height, int radius, bool horizontal, bool dilation) {
  const int lines = horizontal ? height : width;
  const int length = horizontal ? width : height;
  const std::size_t step = horizontal ? 1 : static_cast<std::size_t>(width);
  for (int line = 0; line < lines; ++line) {
    const std::size_t base =
        horizontal ? static_cast<std::size_t>(line) * width : static_cast<std::size_t>(line);
    // Running count of foreground pixels inside the window [i - radius, i + radius].
    int count = 0;
    for (int j = 0; j <= std::min(radius, length - 1); ++j) count += src[base + j * step];
    for (int i = 0; i < length; ++i) {
      if (dilation) {
        dst[base + i * step] = count > 0 ? 1 : 0;
      } else {
        const bool inside = i - radius >= 0 && i + radius < length;
        dst[base + i * step] = inside && count == 2 * radius + 1 ? 1 : 0;
      }
      const int leaving = i - radius;
      const int entering = i + radius + 1;
      if (leaving >= 0) count -= src[base + leaving * step];
      if (entering < length) count += src[base + entering * step];
    }
  }
}

inline BinaryMask morph(const BinaryMask& mask, int radius, int iterations, bool dilation) {
  check_morphology_params(radius, iterations);
  BinaryMask cur = mask;
  std::vector<std::uint8_t> tmp(mask.pixel_count());
  for (int it = 0; it < iterations; ++it) {
    morph_pass(cur.data(), tmp, mask.width(), mask.height(), radius, true, dilation);
    morph_pass(tmp, cur.data(), mask.width(), mask.height(), radius, false, dilation);
  }
  return cur;
}

}  // namespace detail

/// Binary dilation by a (2r+1)x(2r+1) square, repeated `iterations` times.
inline BinaryMask dilate(const BinaryMask& mask, int radius = 1, int iterations = 1) {
  return detail::morph(mask, radius, iterations, true);
}

/// Binary erosion by a (2r+1)x(2r+1) square; out-of-image pixels are background.
inline BinaryMask erode(const BinaryMask& mask, int radius = 1, int iterations = 1) {
  return detail::morph(mask, radius, iterations, false);
}

enum class Connectivity { Four = 4, Eight = 8 };

struct Components {
  /// 0 for background, 1..count for foreground components.
  Raster<std::int32_t, 1> labels;
  /// areas[i] is the pixel count of label i + 1.
  std::vector<std::size_t> areas;

  std::size_t count() const { return areas.size(); }
};

/**
 * Labels foreground components. Labels are assigned in raster order of each
 * component's first pixel.
 */
inline Components connected_components(const BinaryMask& mask,
                                       Connectivity connectivity = Connectivity::Eight) {
  const int w = mask.width(), h = mask.height();
  Components out{Raster<std::int32_t, 1>(w, h, 0), {}};
  auto& labels = out.labels;
  const bool eight = connectivity == Connectivity::Eight;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.pixel_count(); ++start) {
    if (!mask[start] || labels[start] != 0) continue;
    const auto label = static_cast<std::int32_t>(out.areas.size() + 1);
    std::size_t area = 0;
    labels[start] = label;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++area;
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (!eight && dx != 0 && dy != 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
          if (mask[q] && labels[q] == 0) {
            labels[q] = label;
            stack.push_back(q);
          }
        }
      }
    }
    out.areas.push_back(area);
  }
  return out;
}

/// Clears every foreground component whose area is below `min_area`.
inline BinaryMask remove_small_components(const BinaryMask& mask, std::size_t min_area,
                                          Connectivity connectivity = Connectivity::Eight) {
  if (min_area == 0) return mask;
  const auto cc = connected_components(mask, connectivity);
  BinaryMask out = mask;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    const auto label = cc.labels[i];
    if (label != 0 && cc.areas[label - 1] < min_area) out[i] = 0;
  }
  return out;
}

}  // namespace tissueseg
