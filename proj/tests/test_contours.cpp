#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "tissueseg/contour.hpp"

namespace tissueseg {
namespace {

BinaryMask square(int size, int x0, int y0, int side, BinaryMask m) {
  for (int y = y0; y < y0 + side && y < size; ++y) {
    for (int x = x0; x < x0 + side && x < size; ++x) m.at(x, y) = 1;
  }
  return m;
}

BinaryMask clear_square(int x0, int y0, int side, BinaryMask m) {
  for (int y = y0; y < y0 + side; ++y) {
    for (int x = x0; x < x0 + side; ++x) m.at(x, y) = 0;
  }
  return m;
}

std::vector<std::vector<bool>> region_membership(const ContourTree& tree) {
  std::vector<std::vector<bool>> in(tree.contours.size(),
                                    std::vector<bool>(static_cast<std::size_t>(tree.width) * tree.height));
  for (std::size_t k = 0; k < tree.contours.size(); ++k) {
    for (const auto& s : tree.contours[k].region) {
      for (int x = s.x0; x <= s.x1; ++x) in[k][static_cast<std::size_t>(s.y) * tree.width + x] = true;
    }
  }
  return in;
}

TEST(FindContours, EmptyMaskHasNoContours) {
  const auto tree = find_contours(BinaryMask(8, 8, 0));
  EXPECT_TRUE(tree.contours.empty());
  EXPECT_EQ(tree.max_depth(), -1);
  EXPECT_EQ(reconstruct(tree), BinaryMask(8, 8, 0));
}

TEST(FindContours, FullMaskIsOneRegion) {
  const auto tree = find_contours(BinaryMask(6, 5, 1));
  ASSERT_EQ(tree.contours.size(), 1u);
  EXPECT_DOUBLE_EQ(contour_area(tree.contours[0]), 30.0);
  EXPECT_EQ(tree.contours[0].points.size(), 2u * 6 + 2u * 3);
}

TEST(FindContours, SquareBoundary) {
  const auto m = square(10, 2, 3, 3, BinaryMask(10, 10, 0));
  const auto tree = find_contours(m);
  ASSERT_EQ(tree.contours.size(), 1u);
  const auto& c = tree.contours[0];
  EXPECT_EQ(c.depth, 0);
  EXPECT_FALSE(c.parent.has_value());
  EXPECT_DOUBLE_EQ(contour_area(c), 9.0);
  EXPECT_EQ(c.points.size(), 8u);
  EXPECT_EQ(c.points.front(), (Point{2, 3}));
  const std::set<std::pair<int, int>> pts = [&] {
    std::set<std::pair<int, int>> s;
    for (auto p : c.points) s.emplace(p.x, p.y);
    return s;
  }();
  EXPECT_EQ(pts.count({3, 4}), 0u);  // interior pixel is not on the boundary
}

TEST(FindContours, IsolatedPixel) {
  BinaryMask m(5, 5, 0);
  m.at(2, 2) = 1;
  const auto tree = find_contours(m);
  ASSERT_EQ(tree.contours.size(), 1u);
  EXPECT_EQ(tree.contours[0].points, (std::vector<Point>{{2, 2}}));
  EXPECT_DOUBLE_EQ(contour_area(tree.contours[0]), 1.0);
}

TEST(FindContours, DiagonalPixelsFormOneComponent) {
  BinaryMask m(4, 4, 0);
  m.at(1, 1) = 1;
  m.at(2, 2) = 1;
  const auto tree = find_contours(m);
  ASSERT_EQ(tree.contours.size(), 1u);
  EXPECT_EQ(tree.contours[0].points.size(), 2u);
}

TEST(FindContours, RingHasHoleChild) {
  auto m = square(12, 2, 2, 7, BinaryMask(12, 12, 0));
  m = clear_square(4, 4, 3, m);
  const auto tree = find_contours(m);
  ASSERT_EQ(tree.contours.size(), 2u);
  const auto& outer = tree.contours[0];
  const auto& hole = tree.contours[1];
  EXPECT_EQ(outer.depth, 0);
  EXPECT_EQ(hole.depth, 1);
  EXPECT_TRUE(hole.is_hole());
  EXPECT_EQ(hole.parent, std::optional<std::size_t>(0));
  EXPECT_EQ(outer.children, (std::vector<std::size_t>{1}));
  EXPECT_DOUBLE_EQ(contour_area(outer), 49.0);  // the enclosed hole counts
  EXPECT_DOUBLE_EQ(contour_area(hole), 9.0);
  EXPECT_EQ(reconstruct(tree), m);
}

TEST(FindContours, ThreeLevels) {
  auto m = square(16, 1, 1, 13, BinaryMask(16, 16, 0));
  m = clear_square(3, 3, 9, m);
  m = square(16, 5, 5, 5, m);
  const auto tree = find_contours(m);
  ASSERT_EQ(tree.contours.size(), 3u);
  EXPECT_EQ(tree.max_depth(), 2);
  EXPECT_EQ(tree.at_depth(2).size(), 1u);
  EXPECT_EQ(tree.contours[2].parent, std::optional<std::size_t>(1));
  EXPECT_EQ(reconstruct(tree), m);
}

TEST(FindContours, DiagonalGapKeepsHoleClosed) {
  // Background pixels meeting only diagonally are not 4-connected, so the centre stays a hole.
  BinaryMask m(5, 5, 0);
  for (auto [x, y] : std::vector<std::pair<int, int>>{{2, 1}, {1, 2}, {3, 2}, {2, 3}}) m.at(x, y) = 1;
  const auto tree = find_contours(m);
  ASSERT_EQ(tree.contours.size(), 2u);
  EXPECT_EQ(tree.contours[1].depth, 1);
  EXPECT_DOUBLE_EQ(contour_area(tree.contours[1]), 1.0);
  EXPECT_EQ(reconstruct(tree), m);
}

TEST(FindContours, ParentsPrecedeChildren) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto tree = find_contours(oracle::random_blobs(rng, 40, 40, 10));
    for (std::size_t k = 0; k < tree.contours.size(); ++k) {
      const auto& c = tree.contours[k];
      if (c.parent) {
        ASSERT_LT(*c.parent, k);
        EXPECT_EQ(tree.contours[*c.parent].depth + 1, c.depth);
      } else {
        EXPECT_EQ(c.depth, 0);
      }
      for (auto child : c.children) EXPECT_EQ(tree.contours[child].parent, std::optional<std::size_t>(k));
    }
  }
}

TEST(FindContours, DepthMatchesPeelingOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 150; ++trial) {
    const auto m = trial % 2 ? oracle::random_blobs(rng, 32, 32, 8) : oracle::random_mask(rng, 24, 24, 0.55);
    const auto tree = find_contours(m);
    const auto depth = oracle::nesting_depth(m);
    const auto in = region_membership(tree);
    for (std::size_t p = 0; p < m.pixel_count(); ++p) {
      int containing = 0;
      for (std::size_t k = 0; k < tree.contours.size(); ++k) containing += in[k][p];
      ASSERT_EQ(containing, depth[p] + 1) << "trial " << trial << " pixel " << p;
    }
  }
}

TEST(FindContours, ReconstructionRoundTrip) {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = trial % 2 ? oracle::random_blobs(rng, 30, 25, 9) : oracle::random_mask(rng, 20, 17, 0.5);
    ASSERT_EQ(reconstruct(find_contours(m)), m) << "trial " << trial;
  }
}

TEST(FindContours, TracedPointsWalkTheRegionBoundary) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = oracle::random_blobs(rng, 32, 32, 8);
    const auto tree = find_contours(m);
    const auto in = region_membership(tree);
    const int w = m.width(), h = m.height();
    for (std::size_t k = 0; k < tree.contours.size(); ++k) {
      const auto& c = tree.contours[k];
      auto inside = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < w && y < h && in[k][static_cast<std::size_t>(y) * w + x];
      };
      std::set<std::pair<int, int>> pts;
      for (std::size_t i = 0; i < c.points.size(); ++i) {
        const auto p = c.points[i];
        ASSERT_TRUE(inside(p.x, p.y));
        pts.emplace(p.x, p.y);
        const auto q = c.points[(i + 1) % c.points.size()];
        if (c.points.size() > 1) {
          ASSERT_LE(std::abs(p.x - q.x), 1);
          ASSERT_LE(std::abs(p.y - q.y), 1);
        }
      }
      // Every region pixel with a 4-neighbour outside the region is on the trace.
      for (const auto& s : c.region) {
        for (int x = s.x0; x <= s.x1; ++x) {
          const bool edge = !inside(x - 1, s.y) || !inside(x + 1, s.y) || !inside(x, s.y - 1) ||
                            !inside(x, s.y + 1);
          if (edge) {
            ASSERT_TRUE(pts.count({x, s.y})) << "trial " << trial << " contour " << k;
          }
        }
      }
    }
  }
}

TEST(ContourDistance, Examples) {
  Contour a, b;
  a.points = {{0, 0}, {1, 0}};
  b.points = {{4, 4}, {4, 0}};
  EXPECT_DOUBLE_EQ(contour_distance(a, b), 3.0);
  EXPECT_DOUBLE_EQ(contour_distance(a, a), 0.0);
  EXPECT_THROW(contour_distance(a, Contour{}), Error);
}

TEST(FillContours, PaintsRegions) {
  auto m = square(12, 1, 1, 4, BinaryMask(12, 12, 0));
  m = square(12, 7, 7, 3, m);
  const auto tree = find_contours(m);
  ASSERT_EQ(tree.contours.size(), 2u);
  const std::vector<Contour> first{tree.contours[0]};
  const auto out = fill_contours(first, 1, BinaryMask(12, 12, 0));
  EXPECT_EQ(count_foreground(out), 16u);
  const auto erased = fill_contours(first, 0, m);
  EXPECT_EQ(count_foreground(erased), 9u);
  EXPECT_THROW(fill_contours(first, 2, m), Error);
}

}  // namespace
}  // namespace tissueseg
