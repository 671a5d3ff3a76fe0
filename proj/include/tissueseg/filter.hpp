#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tissueseg/image.hpp"

namespace tissueseg {

/// Sampled Gaussian of radius ceil(3*sigma), normalized to unit sum.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidParam, "sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& w : k) w /= sum;
  return k;
}

/**
 * Separable Gaussian blur with clamp-to-edge borders. The horizontal pass is
 * kept in double precision; only the final vertical pass is rounded to 8 bit.
 */
inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = img.width(), h = img.height();

  std::vector<double> tmp(img.pixel_count());
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int sx = std::clamp(x + k, 0, w - 1);
        acc += kernel[k + radius] * img[row + sx];
      }
      tmp[row + x] = acc;
    }
  }

  GrayImage out(w, h);
  std::vector<double> col(w);
  for (int y = 0; y < h; ++y) {
    std::fill(col.begin(), col.end(), 0.0);
    for (int k = -radius; k <= radius; ++k) {
      const int sy = std::clamp(y + k, 0, h - 1);
      const double wk = kernel[k + radius];
      const double* src = tmp.data() + static_cast<std::size_t>(sy) * w;
      for (int x = 0; x < w; ++x) col[x] += wk * src[x];
    }
    for (int x = 0; x < w; ++x) {
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(col[x]), 0L, 255L));
    }
  }
  return out;
}

}  // namespace tissueseg
