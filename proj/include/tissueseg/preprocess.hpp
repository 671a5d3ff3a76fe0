#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>

#include "tissueseg/image.hpp"
#include "tissueseg/morphology.hpp"

namespace tissueseg {

inline constexpr int kThumbnailSize = 1024;

namespace detail {

inline std::pair<int, int> fitted_size(int w, int h, int max_dim) {
  if (max_dim < 1) throw Error(ErrorKind::InvalidParam, "maxDim must be >= 1");
  const int longest = std::max(w, h);
  if (longest <= max_dim) return {w, h};
  const double scale = static_cast<double>(max_dim) / longest;
  const int nw = std::max(1, static_cast<int>(std::lround(w * scale)));
  const int nh = std::max(1, static_cast<int>(std::lround(h * scale)));
  return {nw, nh};
}

}  // namespace detail

/// Bilinear downscale so that neither side exceeds `max_dim`; never upscales.
inline RgbImage fit_within(const RgbImage& img, int max_dim = kThumbnailSize) {
  const auto [nw, nh] = detail::fitted_size(img.width(), img.height(), max_dim);
  if (nw == img.width() && nh == img.height()) return img;
  RgbImage out(nw, nh);
  const double sx = static_cast<double>(img.width()) / nw;
  const double sy = static_cast<double>(img.height()) / nh;
  for (int y = 0; y < nh; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < nw; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(x0, y0, c) * (1 - wx) + img.at(x1, y0, c) * wx;
        const double bottom = img.at(x0, y1, c) * (1 - wx) + img.at(x1, y1, c) * wx;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(top * (1 - wy) + bottom * wy));
      }
    }
  }
  return out;
}

/// Nearest-neighbour downscale; the result stays binary.
inline BinaryMask fit_within(const BinaryMask& mask, int max_dim = kThumbnailSize) {
  const auto [nw, nh] = detail::fitted_size(mask.width(), mask.height(), max_dim);
  if (nw == mask.width() && nh == mask.height()) return mask;
  BinaryMask out(nw, nh);
  const double sx = static_cast<double>(mask.width()) / nw;
  const double sy = static_cast<double>(mask.height()) / nh;
  for (int y = 0; y < nh; ++y) {
    const int src_y = std::min(mask.height() - 1, static_cast<int>((y + 0.5) * sy));
    for (int x = 0; x < nw; ++x) {
      const int src_x = std::min(mask.width() - 1, static_cast<int>((x + 0.5) * sx));
      out.at(x, y) = mask.at(src_x, src_y);
    }
  }
  return out;
}

struct PadRecord {
  int original_width = 0;
  int original_height = 0;
  int scaled_width = 0;
  int scaled_height = 0;
  double scale = 1.0;
  int pad_right = 0;
  int pad_bottom = 0;
};

template <typename Image>
struct Padded {
  Image image;
  PadRecord record;
};

/**
 * Anchors content at the top-left of a size x size canvas. The record's
 * original/scale fields describe the padded content itself; callers that
 * resized first fill them in from the pre-resize dimensions.
 */
template <typename T, int C, typename Tag>
Padded<Raster<T, C, Tag>> pad_to_square(const Raster<T, C, Tag>& img, int size, T pad_value) {
  if (img.width() > size || img.height() > size) {
    throw Error(ErrorKind::InvalidParam, "input larger than pad size");
  }
  Raster<T, C, Tag> out(size, size, pad_value);
  for (int y = 0; y < img.height(); ++y) {
    std::copy_n(img.data().begin() + static_cast<std::ptrdiff_t>(img.index(0, y)) * C,
                static_cast<std::size_t>(img.width()) * C,
                out.data().begin() + static_cast<std::ptrdiff_t>(out.index(0, y)) * C);
  }
  PadRecord rec{img.width(), img.height(), img.width(), img.height(), 1.0,
                size - img.width(), size - img.height()};
  return {std::move(out), rec};
}

/// White padding for thumbnails.
inline Padded<RgbImage> pad_to_square(const RgbImage& img, int size = kThumbnailSize) {
  return pad_to_square<std::uint8_t, 3, GrayTag>(img, size, 255);
}

/// Background padding for masks.
inline Padded<BinaryMask> pad_to_square(const BinaryMask& mask, int size = kThumbnailSize) {
  return pad_to_square<std::uint8_t, 1, MaskTag>(mask, size, 0);
}

template <typename T, int C, typename Tag>
Raster<T, C, Tag> unpad(const Raster<T, C, Tag>& padded, const PadRecord& rec) {
  const int w = padded.width() - rec.pad_right;
  const int h = padded.height() - rec.pad_bottom;
  Raster<T, C, Tag> out(w, h);
  for (int y = 0; y < h; ++y) {
    std::copy_n(padded.data().begin() + static_cast<std::ptrdiff_t>(padded.index(0, y)) * C,
                static_cast<std::size_t>(w) * C,
                out.data().begin() + static_cast<std::ptrdiff_t>(out.index(0, y)) * C);
  }
  return out;
}

/// fit_within followed by pad_to_square, with the record describing both.
template <typename Image>
Padded<Image> normalize_thumbnail(const Image& img, int size = kThumbnailSize) {
  auto fitted = fit_within(img, size);
  auto padded = pad_to_square(fitted, size);
  padded.record.original_width = img.width();
  padded.record.original_height = img.height();
  padded.record.scale = static_cast<double>(fitted.width()) / img.width();
  return padded;
}

/// Nearest-neighbour resize to an exact size; the result stays binary.
inline BinaryMask resize_nearest(const BinaryMask& mask, int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorKind::InvalidParam, "target size must be positive");
  if (width == mask.width() && height == mask.height()) return mask;
  BinaryMask out(width, height);
  const double sx = static_cast<double>(mask.width()) / width;
  const double sy = static_cast<double>(mask.height()) / height;
  for (int y = 0; y < height; ++y) {
    const int src_y = std::min(mask.height() - 1, static_cast<int>((y + 0.5) * sy));
    for (int x = 0; x < width; ++x) {
      const int src_x = std::min(mask.width() - 1, static_cast<int>((x + 0.5) * sx));
      out.at(x, y) = mask.at(src_x, src_y);
    }
  }
  return out;
}

/// Inverse of normalize_thumbnail for masks: crops the padding and resizes to the original size.
inline BinaryMask restore_geometry(const BinaryMask& normalized, const PadRecord& rec) {
  return resize_nearest(unpad(normalized, rec), rec.original_width, rec.original_height);
}

/// One 3x3 dilation pass, as used to keep tissue borders in annotated masks.
inline BinaryMask refine_dilate(const BinaryMask& mask) { return dilate(mask, 1, 1); }

/// Nearest-neighbour upscale to a higher pyramid level: each pixel becomes a factor x factor block.
inline BinaryMask project_to_magnification(const BinaryMask& mask, int factor) {
  if (factor < 1) throw Error(ErrorKind::InvalidParam, "factor must be >= 1");
  if (factor == 1) return mask;
  BinaryMask out(mask.width() * factor, mask.height() * factor);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out.at(x, y) = mask.at(x / factor, y / factor);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentSpec {
  /// Counter-clockwise on screen, about the image centre.
  double rotation_degrees = 0.0;
  bool hflip = false;
  bool vflip = false;
};

namespace detail {

template <typename T, int C, typename Tag>
Raster<T, C, Tag> flip(const Raster<T, C, Tag>& img, bool horizontal) {
  Raster<T, C, Tag> out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int sx = horizontal ? img.width() - 1 - x : x;
      const int sy = horizontal ? y : img.height() - 1 - y;
      for (int c = 0; c < C; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

// Maps output pixel (x, y) back to source coordinates for a counter-clockwise
// rotation about the centre. Quarter turns use exact integer arithmetic.
struct RotationMap {
  double cos_t = 1.0, sin_t = 0.0, cx = 0.0, cy = 0.0;
  int quarter = -1;  // 0..3 when the angle is a multiple of 90 degrees

  RotationMap(double degrees, int w, int h) : cx((w - 1) / 2.0), cy((h - 1) / 2.0) {
    const double q = degrees / 90.0;
    if (std::abs(q - std::round(q)) < 1e-9) {
      quarter = static_cast<int>(((static_cast<long>(std::lround(q)) % 4) + 4) % 4);
    }
    const double rad = degrees * std::numbers::pi / 180.0;
    cos_t = std::cos(rad);
    sin_t = std::sin(rad);
  }

  // y points down, so a visual counter-clockwise turn samples the source at
  // (u cos - v sin, u sin + v cos) relative to the centre.
  std::pair<double, double> source(int x, int y) const {
    const double u = x - cx, v = y - cy;
    if (quarter >= 0) {
      switch (quarter) {
        case 0: return {x, y};
        case 1: return {cx - v, cy + u};
        case 2: return {cx - u, cy - v};
        case 3: return {cx + v, cy - u};
      }
    }
    return {cx + u * cos_t - v * sin_t, cy + u * sin_t + v * cos_t};
  }
};

}  // namespace detail

/// Rotation with bilinear sampling; uncovered pixels become white.
inline RgbImage rotate(const RgbImage& img, double degrees) {
  const detail::RotationMap map(degrees, img.width(), img.height());
  RgbImage out(img.width(), img.height(), 255);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto [fx, fy] = map.source(x, y);
      if (map.quarter >= 0) {
        const int sx = static_cast<int>(std::lround(fx)), sy = static_cast<int>(std::lround(fy));
        if (!img.contains(sx, sy)) continue;
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
        continue;
      }
      const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
      const double wx = fx - x0, wy = fy - y0;
      if (x0 < -1 || y0 < -1 || x0 >= img.width() || y0 >= img.height()) continue;
      for (int c = 0; c < 3; ++c) {
        auto sample = [&](int sx, int sy) -> double {
          return img.contains(sx, sy) ? img.at(sx, sy, c) : 255.0;
        };
        const double top = sample(x0, y0) * (1 - wx) + sample(x0 + 1, y0) * wx;
        const double bottom = sample(x0, y0 + 1) * (1 - wx) + sample(x0 + 1, y0 + 1) * wx;
        out.at(x, y, c) = static_cast<std::uint8_t>(
            std::clamp(std::lround(top * (1 - wy) + bottom * wy), 0L, 255L));
      }
    }
  }
  return out;
}

/// Rotation with nearest sampling; uncovered pixels become background.
inline BinaryMask rotate(const BinaryMask& mask, double degrees) {
  const detail::RotationMap map(degrees, mask.width(), mask.height());
  BinaryMask out(mask.width(), mask.height(), 0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const auto [fx, fy] = map.source(x, y);
      const int sx = static_cast<int>(std::lround(fx)), sy = static_cast<int>(std::lround(fy));
      if (mask.contains(sx, sy)) out.at(x, y) = mask.at(sx, sy);
    }
  }
  return out;
}

template <typename T, int C, typename Tag>
Raster<T, C, Tag> apply_flips(Raster<T, C, Tag> img, const AugmentSpec& spec) {
  if (spec.hflip) img = detail::flip(img, true);
  if (spec.vflip) img = detail::flip(img, false);
  return img;
}

inline void validate(const AugmentSpec& spec) {
  if (!(spec.rotation_degrees >= -180.0 && spec.rotation_degrees <= 180.0)) {
    throw Error(ErrorKind::InvalidParam, "rotation must lie in [-180, 180] degrees");
  }
}

/// Applies the same transform to a mask alone (rotation, then hflip, then vflip).
inline BinaryMask augment_mask(const BinaryMask& mask, const AugmentSpec& spec) {
  validate(spec);
  return apply_flips(rotate(mask, spec.rotation_degrees), spec);
}

/// Rotation, then horizontal flip, then vertical flip, identically on both.
inline std::pair<RgbImage, BinaryMask> augment_pair(const RgbImage& img, const BinaryMask& mask,
                                                    const AugmentSpec& spec) {
  require_same_size(img, mask, "augment_pair");
  validate(spec);
  return {apply_flips(rotate(img, spec.rotation_degrees), spec), augment_mask(mask, spec)};
}

/**
 * Draws a spec from a 64-bit Mersenne Twister. Only raw engine output is used
 * (no std distributions), so the same seed gives the same spec everywhere:
 * rotation = -180 + 360 * (top 53 bits / 2^53), then one bit per flip.
 */
inline AugmentSpec random_augment_spec(std::mt19937_64& rng) {
  AugmentSpec spec;
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  spec.rotation_degrees = -180.0 + 360.0 * u;
  spec.hflip = (rng() >> 63) != 0;
  spec.vflip = (rng() >> 63) != 0;
  return spec;
}

}  // namespace tissueseg
