#pragma once

// Brute-force reference implementations used only by the test suites. Each one
// takes the slow, obvious route so it shares no code path with the library.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "tissueseg/image.hpp"

namespace oracle {

using tissueseg::BinaryMask;
using tissueseg::GrayImage;

struct Counts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
};

inline Counts enumerate_confusion(const BinaryMask& pred, const BinaryMask& gt) {
  Counts c;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      const bool p = pred.at(x, y) == 1, g = gt.at(x, y) == 1;
      if (p && g) ++c.tp;
      if (!p && !g) ++c.tn;
      if (p && !g) ++c.fp;
      if (!p && g) ++c.fn;
    }
  }
  return c;
}

/// Between-class variance of {v <= t} vs {v > t} computed from class means directly.
inline double between_class_variance(const std::array<std::uint64_t, 256>& h, int t) {
  double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
  for (int v = 0; v < 256; ++v) {
    if (v <= t) {
      n0 += h[v];
      s0 += static_cast<double>(h[v]) * v;
    } else {
      n1 += h[v];
      s1 += static_cast<double>(h[v]) * v;
    }
  }
  if (n0 == 0 || n1 == 0) return 0.0;
  const double n = n0 + n1;
  const double mu0 = s0 / n0, mu1 = s1 / n1;
  return (n0 / n) * (n1 / n) * (mu0 - mu1) * (mu0 - mu1);
}

/// Exhaustive sweep over all 255 thresholds; smallest maximizer wins. -1 when degenerate.
inline int exhaustive_otsu(const std::array<std::uint64_t, 256>& h) {
  int best = -1;
  double best_var = 0.0;
  for (int t = 0; t <= 254; ++t) {
    const double v = between_class_variance(h, t);
    if (v > best_var * (1 + 1e-12) && v > 0) {
      best_var = v;
      best = t;
    }
  }
  return best;
}

inline void flood(const BinaryMask& m, std::vector<int>& label, int x, int y, int id,
                  bool eight, std::uint8_t value, std::size_t& area) {
  if (x < 0 || y < 0 || x >= m.width() || y >= m.height()) return;
  const auto i = m.index(x, y);
  if (m[i] != value || label[i] != 0) return;
  label[i] = id;
  ++area;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if ((dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0)) continue;
      flood(m, label, x + dx, y + dy, id, eight, value, area);
    }
  }
}

struct FloodComponents {
  std::vector<int> label;
  std::vector<std::size_t> areas;
};

/// Recursive flood fill over pixels equal to `value`.
inline FloodComponents flood_components(const BinaryMask& m, bool eight, std::uint8_t value = 1) {
  FloodComponents out{std::vector<int>(m.pixel_count(), 0), {}};
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m.at(x, y) == value && out.label[m.index(x, y)] == 0) {
        std::size_t area = 0;
        flood(m, out.label, x, y, static_cast<int>(out.areas.size()) + 1, eight, value, area);
        out.areas.push_back(area);
      }
    }
  }
  return out;
}

/**
 * Nesting depth of every pixel, computed by peeling: flood the background from
 * a one-pixel frame (4-connected), then the foreground reachable from it
 * (8-connected), alternating. Depth -1 is the outer background; foreground
 * peeled on round r has depth 2r, the background after it 2r + 1.
 */
inline std::vector<int> nesting_depth(const BinaryMask& m) {
  const int w = m.width() + 2, h = m.height() + 2;
  std::vector<std::uint8_t> v(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) v[(y + 1) * w + x + 1] = m.at(x, y);
  }
  std::vector<int> depth(v.size(), -2);
  std::vector<std::size_t> frontier{0};
  depth[0] = -1;
  int level = -1;
  while (!frontier.empty()) {
    // Grow within the current class.
    std::vector<std::size_t> stack = frontier;
    std::vector<std::size_t> region = frontier;
    const std::uint8_t cls = v[frontier[0]];
    const bool eight = cls == 1;
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0)) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const auto q = static_cast<std::size_t>(ny) * w + nx;
          if (depth[q] == -2 && v[q] == cls) {
            depth[q] = level;
            stack.push_back(q);
            region.push_back(q);
          }
        }
      }
    }
    // Seeds of the next class: unvisited 4-neighbours of this region.
    ++level;
    frontier.clear();
    for (auto p : region) {
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      const int nbr[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
      for (const auto& d : nbr) {
        const int nx = x + d[0], ny = y + d[1];
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const auto q = static_cast<std::size_t>(ny) * w + nx;
        if (depth[q] == -2 && v[q] != cls) {
          depth[q] = level;
          frontier.push_back(q);
        }
      }
    }
  }
  std::vector<int> out(m.pixel_count());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) out[m.index(x, y)] = depth[(y + 1) * w + x + 1];
  }
  return out;
}

inline BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density = 0.5) {
  BinaryMask m(w, h);
  std::bernoulli_distribution coin(density);
  for (auto& v : m.data()) v = coin(rng) ? 1 : 0;
  return m;
}

/// Random union of filled rectangles and discs: blob-like masks with holes.
inline BinaryMask random_blobs(std::mt19937_64& rng, int w, int h, int shapes = 6) {
  BinaryMask m(w, h, 0);
  std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1), rad(1, std::max(2, w / 6));
  std::bernoulli_distribution coin(0.5);
  for (int s = 0; s < shapes; ++s) {
    const int cx = px(rng), cy = py(rng), r = rad(rng);
    const std::uint8_t value = s < 2 || coin(rng) ? 1 : 0;
    const bool disc = coin(rng);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int dx = x - cx, dy = y - cy;
        const bool in = disc ? dx * dx + dy * dy <= r * r : std::abs(dx) <= r && std::abs(dy) <= r;
        if (in) m.at(x, y) = value;
      }
    }
  }
  return m;
}

}  // namespace oracle
