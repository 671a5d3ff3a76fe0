#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "tissueseg/image.hpp"

namespace tissueseg {

/// BT.601 luma, rounded half away from zero.
inline std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  return static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
}

inline GrayImage to_grayscale(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  const auto& src = img.data();
  auto& dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = luma(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
  }
  return out;
}

namespace detail {

// D65 reference white taken as the row sums of the sRGB->XYZ matrix, so that
// neutral grays come out with zero chroma.
inline constexpr double kWhiteX = 0.4124564 + 0.3575761 + 0.1804375;
inline constexpr double kWhiteY = 0.2126729 + 0.7151522 + 0.0721750;
inline constexpr double kWhiteZ = 0.0193339 + 0.1191920 + 0.9503041;

inline double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// 256-entry linearization table; the gamma curve dominates per-pixel cost.
inline const std::array<double, 256>& linear_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) t[i] = srgb_to_linear(i / 255.0);
    return t;
  }();
  return table;
}

}  // namespace detail

inline std::array<double, 3> rgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const auto& lin = detail::linear_table();
  const double r = lin[r8], g = lin[g8], b = lin[b8];
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = detail::lab_f(x / detail::kWhiteX);
  const double fy = detail::lab_f(y / detail::kWhiteY);
  const double fz = detail::lab_f(z / detail::kWhiteZ);
  const double l = std::clamp(116.0 * fy - 16.0, 0.0, 100.0);
  return {l, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

/// sRGB (D65) to CIELAB, per pixel.
inline LabImage rgb_to_lab(const RgbImage& img) {
  LabImage out(img.width(), img.height());
  const auto& src = img.data();
  auto& dst = out.data();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const auto lab = rgb_to_lab(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
    dst[3 * i] = lab[0];
    dst[3 * i + 1] = lab[1];
    dst[3 * i + 2] = lab[2];
  }
  return out;
}

}  // namespace tissueseg
