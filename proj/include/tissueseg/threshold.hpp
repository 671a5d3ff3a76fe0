#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <optional>

#include <boost/multiprecision/cpp_int.hpp>

#include "tissueseg/image.hpp"

namespace tissueseg {

struct Histogram256 {
  std::array<std::uint64_t, 256> bins{};

  std::uint64_t total() const {
    return std::accumulate(bins.begin(), bins.end(), std::uint64_t{0});
  }
};

inline Histogram256 histogram(const GrayImage& img) {
  Histogram256 h;
  for (auto v : img.data()) ++h.bins[v];
  return h;
}

/// Histogram over the pixels where `where` is 1.
inline Histogram256 histogram(const GrayImage& img, const BinaryMask& where) {
  require_same_size(img, where, "histogram");
  Histogram256 h;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    if (where[i]) ++h.bins[img[i]];
  }
  return h;
}

/**
 * Otsu threshold: the t in [0, 254] maximizing the between-class variance of
 * the classes {v <= t} and {v > t}. Ties resolve to the smallest t.
 *
 * With class counts n0, n1 and sums s0, s1 the between-class variance is
 * (s0*n1 - s1*n0)^2 / (N^2 * n0 * n1). Candidates are compared by exact
 * cross-multiplication in 256-bit integers, so equal variances are detected
 * exactly regardless of image size.
 *
 * Returns nullopt when no threshold separates two non-empty classes (all mass
 * in a single bin, or an empty histogram).
 */
inline std::optional<int> try_otsu_threshold(const Histogram256& h) {
  using boost::multiprecision::int256_t;
  __int128 total_n = 0, total_s = 0;
  for (int v = 0; v < 256; ++v) {
    total_n += h.bins[v];
    total_s += static_cast<__int128>(h.bins[v]) * v;
  }
  std::optional<int> best;
  int256_t best_num = 0, best_den = 1;  // best score = best_num / best_den
  __int128 n0 = 0, s0 = 0;
  for (int t = 0; t < 255; ++t) {
    n0 += h.bins[t];
    s0 += static_cast<__int128>(h.bins[t]) * t;
    const __int128 n1 = total_n - n0;
    const __int128 s1 = total_s - s0;
    if (n0 == 0 || n1 == 0) continue;
    const int256_t diff = int256_t(s0) * int256_t(n1) - int256_t(s1) * int256_t(n0);
    const int256_t num = diff * diff;
    const int256_t den = int256_t(n0) * int256_t(n1);
    if (num * best_den > best_num * den) {
      best_num = num;
      best_den = den;
      best = t;
    }
  }
  return best;
}

inline int otsu_threshold(const Histogram256& h) {
  auto t = try_otsu_threshold(h);
  if (!t) throw Error(ErrorKind::Degenerate, "histogram has no two-class separation");
  return *t;
}

/// floor(mean pixel value)
inline int mean_threshold(const GrayImage& img) {
  std::uint64_t sum = 0;
  for (auto v : img.data()) sum += v;
  return static_cast<int>(sum / img.pixel_count());
}

enum class Polarity { DarkIsForeground, BrightIsForeground };

/// Strict comparison: pixels equal to the threshold are background.
inline BinaryMask binarize(const GrayImage& img, int threshold, Polarity polarity) {
  if (threshold < 0 || threshold > 255) {
    throw Error(ErrorKind::InvalidParam, "threshold must be in [0, 255]");
  }
  BinaryMask out(img.width(), img.height());
  const auto& src = img.data();
  auto& dst = out.data();
  if (polarity == Polarity::DarkIsForeground) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] < threshold ? 1 : 0;
  } else {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > threshold ? 1 : 0;
  }
  return out;
}

/**
 * Otsu's lower class {v <= t} as a mask. Strict dark-foreground binarization at
 * t would drop bin t, which under the smallest-tie rule is the top of the dark
 * cluster, so the cut is t + 1.
 */
inline BinaryMask otsu_dark_class(const GrayImage& img, int otsu_t) {
  return binarize(img, otsu_t + 1, Polarity::DarkIsForeground);
}

}  // namespace tissueseg
