#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "tissueseg/image.hpp"
#include "tissueseg/morphology.hpp"

namespace tissueseg {

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Horizontal run of pixels [x0, x1] on row y.
struct Span {
  int y = 0;
  int x0 = 0;
  int x1 = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

/**
 * A closed boundary together with the region it encloses.
 *
 * Even depths are outer boundaries of foreground components, odd depths are
 * hole boundaries. `region` holds every pixel enclosed by the boundary
 * (boundary inclusive, nested structure included) as row-ordered spans; area
 * and filling are defined on it, so filling a contour repaints exactly the
 * pixels the boundary was traced around.
 */
struct Contour {
  std::vector<Point> points;
  int depth = 0;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  std::vector<Span> region;

  bool is_hole() const noexcept { return depth % 2 == 1; }
};

struct ContourTree {
  int width = 0;
  int height = 0;
  /// Ordered by depth, then by raster position of the component's first pixel.
  /// Parents therefore always precede their children.
  std::vector<Contour> contours;

  std::vector<std::size_t> at_depth(int depth) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < contours.size(); ++i) {
      if (contours[i].depth == depth) out.push_back(i);
    }
    return out;
  }

  int max_depth() const {
    int d = -1;
    for (const auto& c : contours) d = std::max(d, c.depth);
    return d;
  }
};

inline double contour_area(const Contour& c) {
  std::size_t n = 0;
  for (const auto& s : c.region) n += static_cast<std::size_t>(s.x1 - s.x0 + 1);
  return static_cast<double>(n);
}

/// Minimum Euclidean distance over all point pairs.
inline double contour_distance(const Contour& a, const Contour& b) {
  if (a.points.empty() || b.points.empty()) {
    throw Error(ErrorKind::InvalidParam, "contour_distance needs non-empty contours");
  }
  long long best = std::numeric_limits<long long>::max();
  for (const auto& p : a.points) {
    for (const auto& q : b.points) {
      const long long dx = p.x - q.x, dy = p.y - q.y;
      best = std::min(best, dx * dx + dy * dy);
      if (best == 0) return 0.0;
    }
  }
  return std::sqrt(static_cast<double>(best));
}

/// Paints the contour's region onto `canvas`.
inline void paint_contour(const Contour& c, std::uint8_t value, BinaryMask& canvas) {
  for (const auto& s : c.region) {
    if (s.y < 0 || s.y >= canvas.height() || s.x0 < 0 || s.x1 >= canvas.width()) {
      throw Error(ErrorKind::InvalidParam, "contour lies outside the canvas");
    }
    auto* row = canvas.data().data() + static_cast<std::size_t>(s.y) * canvas.width();
    std::fill(row + s.x0, row + s.x1 + 1, value);
  }
}

template <typename ContourRange>
BinaryMask fill_contours(const ContourRange& contours, std::uint8_t value, BinaryMask canvas) {
  if (value > 1) throw Error(ErrorKind::InvalidParam, "fill value must be 0 or 1");
  for (const auto& c : contours) paint_contour(c, value, canvas);
  return canvas;
}

/// Rebuilds a mask from its tree: depth-0 regions painted 1, depth-1 painted 0, and so on.
inline BinaryMask reconstruct(const ContourTree& tree) {
  BinaryMask canvas(tree.width, tree.height, 0);
  for (const auto& c : tree.contours) paint_contour(c, c.is_hole() ? 0 : 1, canvas);
  return canvas;
}

namespace detail {

inline constexpr std::array<int, 8> kMooreDx = {1, 1, 0, -1, -1, -1, 0, 1};
inline constexpr std::array<int, 8> kMooreDy = {0, 1, 1, 1, 0, -1, -1, -1};

inline int moore_direction(int dx, int dy) {
  for (int d = 0; d < 8; ++d) {
    if (kMooreDx[d] == dx && kMooreDy[d] == dy) return d;
  }
  return -1;
}

/**
 * Moore-neighbour boundary tracing, clockwise on screen, starting from the
 * region's top-left pixel with its west neighbour as backtrack. Terminates when
 * the (pixel, backtrack) state after the first move recurs.
 */
template <typename InsideFn>
std::vector<Point> trace_boundary(Point start, InsideFn inside, std::size_t max_steps) {
  std::vector<Point> points{start};
  Point cur = start;
  Point back{start.x - 1, start.y};
  std::optional<std::pair<Point, Point>> first_state;
  for (std::size_t step = 0; step < max_steps; ++step) {
    const int from = moore_direction(back.x - cur.x, back.y - cur.y);
    std::optional<Point> next;
    Point next_back{};
    for (int k = 1; k <= 8; ++k) {
      const int d = (from + k) % 8;
      const Point cand{cur.x + kMooreDx[d], cur.y + kMooreDy[d]};
      if (inside(cand.x, cand.y)) {
        const int prev = (d + 7) % 8;
        next = cand;
        next_back = Point{cur.x + kMooreDx[prev], cur.y + kMooreDy[prev]};
        break;
      }
    }
    if (!next) break;  // isolated pixel
    if (first_state && first_state->first == *next && first_state->second == next_back) break;
    if (!first_state) first_state = std::make_pair(*next, next_back);
    points.push_back(*next);
    cur = *next;
    back = next_back;
  }
  if (points.size() > 1 && points.back() == start) points.pop_back();
  return points;
}

}  // namespace detail

/**
 * Builds the nesting hierarchy of `mask`.
 *
 * Foreground is 8-connected and background 4-connected. Background touching the
 * image border (and everything outside the image) is the root and owns no
 * contour; every other component owns one contour, whose parent is the
 * component surrounding it.
 */
inline ContourTree find_contours(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  ContourTree tree;
  tree.width = w;
  tree.height = h;

  const auto fg = connected_components(mask, Connectivity::Eight);
  const auto bg = connected_components(invert(mask), Connectivity::Four);
  const std::size_t nfg = fg.count();
  const std::size_t ncomp = nfg + bg.count();

  // Combined component id per pixel: foreground [0, nfg), background [nfg, ncomp).
  std::vector<std::int32_t> comp(mask.pixel_count());
  for (std::size_t i = 0; i < comp.size(); ++i) {
    comp[i] = mask[i] ? fg.labels[i] - 1 : static_cast<std::int32_t>(nfg) + bg.labels[i] - 1;
  }

  const auto root = static_cast<std::int32_t>(ncomp);
  std::vector<std::int32_t> node(ncomp);  // component -> graph node (root merged)
  for (std::size_t c = 0; c < ncomp; ++c) node[c] = static_cast<std::int32_t>(c);
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  auto on_border = [&](int x, int y) { return x == 0 || y == 0 || x == w - 1 || y == h - 1; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!on_border(x, y)) continue;
      const auto c = comp[mask.index(x, y)];
      if (mask.at(x, y)) {
        edges.emplace_back(root, c);
      } else {
        node[c] = root;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto p = mask.index(x, y);
      if (x + 1 < w && mask[p] != mask[p + 1]) edges.emplace_back(node[comp[p]], node[comp[p + 1]]);
      if (y + 1 < h && mask[p] != mask[p + w]) edges.emplace_back(node[comp[p]], node[comp[p + w]]);
    }
  }
  for (auto& e : edges) {
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::vector<std::vector<std::int32_t>> adj(ncomp + 1);
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }

  // Breadth-first from the root yields depth-ordered contours with parents first.
  std::vector<std::int32_t> contour_of(ncomp + 1, -1);
  std::vector<std::int32_t> frontier{root};
  std::vector<bool> seen(ncomp + 1, false);
  seen[root] = true;
  int depth = 0;
  while (!frontier.empty()) {
    std::vector<std::pair<std::int32_t, std::int32_t>> next;  // (component, parent node)
    for (auto n : frontier) {
      for (auto m : adj[n]) {
        if (!seen[m]) {
          seen[m] = true;
          next.emplace_back(m, n);
        }
      }
    }
    std::sort(next.begin(), next.end());
    frontier.clear();
    for (const auto& [m, parent] : next) {
      Contour c;
      c.depth = depth;
      if (parent != root) {
        c.parent = static_cast<std::size_t>(contour_of[parent]);
        tree.contours[*c.parent].children.push_back(tree.contours.size());
      }
      contour_of[m] = static_cast<std::int32_t>(tree.contours.size());
      tree.contours.push_back(std::move(c));
      frontier.push_back(m);
    }
    ++depth;
  }

  // Region spans: each pixel belongs to its own contour and every ancestor.
  std::vector<std::int32_t> open_row(tree.contours.size(), -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto n = node[comp[mask.index(x, y)]];
      if (n == root) continue;
      for (auto k = contour_of[n]; k >= 0;) {
        auto& c = tree.contours[k];
        if (open_row[k] == y && c.region.back().x1 == x - 1) {
          c.region.back().x1 = x;
        } else {
          c.region.push_back(Span{y, x, x});
          open_row[k] = y;
        }
        k = c.parent ? static_cast<std::int32_t>(*c.parent) : -1;
      }
    }
  }

  // Membership test via pre/post order of the contour tree.
  const std::size_t nc = tree.contours.size();
  std::vector<std::size_t> tin(nc), tout(nc);
  {
    std::size_t clock = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack;  // (contour, next child)
    for (std::size_t r = 0; r < nc; ++r) {
      if (tree.contours[r].parent) continue;
      stack.emplace_back(r, 0);
      tin[r] = clock++;
      while (!stack.empty()) {
        auto& [k, i] = stack.back();
        if (i < tree.contours[k].children.size()) {
          const auto child = tree.contours[k].children[i++];
          tin[child] = clock++;
          stack.emplace_back(child, 0);
        } else {
          tout[k] = clock;
          stack.pop_back();
        }
      }
    }
  }

  for (std::size_t k = 0; k < nc; ++k) {
    auto& c = tree.contours[k];
    auto inside = [&](int x, int y) {
      if (x < 0 || y < 0 || x >= w || y >= h) return false;
      const auto n = node[comp[mask.index(x, y)]];
      if (n == root) return false;
      const auto t = tin[static_cast<std::size_t>(contour_of[n])];
      return t >= tin[k] && t < tout[k];
    };
    const Point start{c.region.front().x0, c.region.front().y};
    c.points = detail::trace_boundary(start, inside, 8 * mask.pixel_count() + 16);
  }
  return tree;
}

}  // namespace tissueseg
