#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tissueseg/image.hpp"

namespace tissueseg::phantom {

/**
 * Synthetic thumbnails with known ground truth.
 *
 * Layout: a near-white slide background, elliptical stained tissue blobs,
 * optional small stained specks (debris, not tissue) and optional rectangular
 * holes punched into blobs. Tissue is an H&E-like purple whose luma is set by
 * `tissue_luma`; the hue carries negative b* so chroma-based methods see it.
 * Noise, when enabled, adds the same uniform offset to all three channels of a
 * pixel, so it never changes chroma.
 */
using Rgb = std::array<std::uint8_t, 3>;

struct Blob {
  int cx = 0, cy = 0;
  int rx = 0, ry = 0;
  int tissue_luma = 90;
};

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
  int area() const { return w * h; }
};

struct Spec {
  int width = 256;
  int height = 256;
  int background = 245;
  /// Per-pixel uniform noise amplitude (0 = noise-free).
  int noise = 0;
  /// Speck stain luma. Smoothing spreads a speck much darker than the
  /// threshold, so the default sits mid tissue band.
  int speck_luma = 90;
  std::uint64_t seed = 1;
  std::vector<Blob> blobs;
  std::vector<Rect> specks;
  std::vector<Rect> holes;
};

struct Phantom {
  RgbImage image;
  /// Blob pixels minus holes; specks are not tissue.
  BinaryMask tissue;
  BinaryMask specks;
  /// One mask per entry of Spec::holes.
  std::vector<BinaryMask> holes;
};

/// Purple stain scaled so that BT.601 luma is approximately `luma`.
inline Rgb tissue_color(int luma) {
  // (0.62, 0.38, 0.78) * s has luma 0.5076 * s.
  const double s = std::clamp(luma, 10, 200) / 0.5076;
  auto c = [&](double f) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(f * s), 0L, 255L));
  };
  return {c(0.62), c(0.38), c(0.78)};
}

inline bool in_ellipse(const Blob& b, int x, int y) {
  const double dx = (x - b.cx) / static_cast<double>(b.rx);
  const double dy = (y - b.cy) / static_cast<double>(b.ry);
  return dx * dx + dy * dy <= 1.0;
}

inline Phantom render(const Spec& spec) {
  const int w = spec.width, h = spec.height;
  Phantom out{RgbImage(w, h, static_cast<std::uint8_t>(spec.background)), BinaryMask(w, h, 0),
              BinaryMask(w, h, 0), {}};
  for (const auto& b : spec.blobs) {
    const auto color = tissue_color(b.tissue_luma);
    for (int y = std::max(0, b.cy - b.ry); y <= std::min(h - 1, b.cy + b.ry); ++y) {
      for (int x = std::max(0, b.cx - b.rx); x <= std::min(w - 1, b.cx + b.rx); ++x) {
        if (!in_ellipse(b, x, y)) continue;
        for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = color[c];
        out.tissue.at(x, y) = 1;
      }
    }
  }
  auto paint_rect = [&](const Rect& r, auto&& fn) {
    for (int y = std::max(0, r.y); y < std::min(h, r.y + r.h); ++y) {
      for (int x = std::max(0, r.x); x < std::min(w, r.x + r.w); ++x) fn(x, y);
    }
  };
  for (const auto& r : spec.holes) {
    BinaryMask hole(w, h, 0);
    paint_rect(r, [&](int x, int y) {
      for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = static_cast<std::uint8_t>(spec.background);
      out.tissue.at(x, y) = 0;
      hole.at(x, y) = 1;
    });
    out.holes.push_back(std::move(hole));
  }
  const auto speck_color = tissue_color(spec.speck_luma);
  for (const auto& r : spec.specks) {
    paint_rect(r, [&](int x, int y) {
      for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = speck_color[c];
      out.specks.at(x, y) = 1;
      out.tissue.at(x, y) = 0;
    });
  }
  if (spec.noise > 0) {
    std::mt19937_64 rng(spec.seed);
    const auto span = static_cast<std::uint64_t>(2 * spec.noise + 1);
    for (std::size_t i = 0; i < out.image.pixel_count(); ++i) {
      const int offset = static_cast<int>(rng() % span) - spec.noise;
      for (int c = 0; c < 3; ++c) {
        auto& v = out.image[3 * i + c];
        v = static_cast<std::uint8_t>(std::clamp(v + offset, 0, 255));
      }
    }
  }
  return out;
}

/// Single noise-free blob centred in the frame.
inline Spec single_blob(int size, int radius, int luma = 90) {
  Spec s;
  s.width = s.height = size;
  s.blobs.push_back(Blob{size / 2, size / 2, radius, radius, luma});
  return s;
}

/**
 * Random layout drawn from `seed`: 1..3 non-overlapping blobs with luma in
 * [60, 120], background in [240, 250], and optionally specks (side 2..7, area
 * < 50) placed away from blobs. Raw engine output only, so layouts are
 * reproducible across platforms.
 */
inline Spec random_spec(std::uint64_t seed, int size = 256, bool with_specks = false,
                        int noise = 0) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  Spec s;
  s.width = s.height = size;
  s.seed = seed;
  s.noise = noise;
  s.background = uniform(240, 250);
  const int nblobs = uniform(1, 3);
  for (int attempt = 0; attempt < 50 && static_cast<int>(s.blobs.size()) < nblobs; ++attempt) {
    Blob b{0, 0, uniform(size / 12, size / 6), uniform(size / 12, size / 6), uniform(60, 120)};
    b.cx = uniform(b.rx + 4, size - b.rx - 5);
    b.cy = uniform(b.ry + 4, size - b.ry - 5);
    bool clear = true;
    for (const auto& o : s.blobs) {
      const double gap = std::hypot(b.cx - o.cx, b.cy - o.cy) - std::max(b.rx, b.ry) -
                         std::max(o.rx, o.ry);
      if (gap < 8) clear = false;
    }
    if (clear) s.blobs.push_back(b);
  }
  if (with_specks) {
    const int nspecks = uniform(1, 6);
    for (int attempt = 0; attempt < 200 && static_cast<int>(s.specks.size()) < nspecks;
         ++attempt) {
      Rect r{0, 0, uniform(2, 7), uniform(2, 7)};
      r.x = uniform(2, size - r.w - 3);
      r.y = uniform(2, size - r.h - 3);
      bool clear = true;
      for (const auto& b : s.blobs) {
        const double d = std::hypot(r.x - b.cx, r.y - b.cy) - std::max(b.rx, b.ry);
        if (d < 12) clear = false;
      }
      for (const auto& o : s.specks) {
        if (std::abs(r.x - o.x) < 12 && std::abs(r.y - o.y) < 12) clear = false;
      }
      if (clear) s.specks.push_back(r);
    }
  }
  return s;
}

}  // namespace tissueseg::phantom
