#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "kdeflow/domain.hpp"

using namespace kdeflow;

namespace {

// Largest distance from any point of a fine test lattice of `dom` to the grid.
double covering_radius(const Domain& dom, const CoveringGrid& grid, int per_axis) {
  const auto& bb = dom.bounding_box();
  const int d = dom.dim();
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  Point x(static_cast<std::size_t>(d));
  double worst = 0.0;
  while (true) {
    for (int k = 0; k < d; ++k) {
      x[k] = bb[k].first + (bb[k].second - bb[k].first) * idx[k] / (per_axis - 1.0);
    }
    if (dom.contains(x)) worst = std::max(worst, distance(project_to_grid(x, grid), x));
    int k = d - 1;
    while (k >= 0 && ++idx[k] == per_axis) idx[k--] = 0;
    if (k < 0) break;
  }
  return worst;
}

}  // namespace

TEST(Domain, BoxMembershipIncludesBoundary) {
  const Domain dom = Domain::box({{0.0, 1.0}, {-1.0, 2.0}});
  EXPECT_EQ(dom.dim(), 2);
  EXPECT_TRUE(dom.contains(Point{0.0, 2.0}));
  EXPECT_TRUE(dom.contains(Point{0.5, 0.0}));
  EXPECT_FALSE(dom.contains(Point{1.0 + 1e-12, 0.0}));
  EXPECT_DOUBLE_EQ(dom.volume(), 3.0);
}

TEST(Domain, BallMembershipAndVolume) {
  const Domain dom = Domain::ball({0.0, 0.0}, 2.0);
  EXPECT_TRUE(dom.contains(Point{2.0, 0.0}));
  EXPECT_FALSE(dom.contains(Point{1.5, 1.5}));
  EXPECT_NEAR(dom.volume(), 4.0 * M_PI, 1e-12);
}

TEST(Domain, RejectsDegenerateShapes) {
  EXPECT_THROW(Domain::box({{1.0, 1.0}}), ConfigError);
  EXPECT_THROW(Domain::box({}), ConfigError);
  EXPECT_THROW(Domain::ball({0.0}, 0.0), ConfigError);
  EXPECT_THROW(Domain::ball({}, 1.0), ConfigError);
}

TEST(BuildGrid, UnitIntervalHalfSpacing) {
  const Domain dom = Domain::box({{0.0, 1.0}});
  const CoveringGrid grid = build_grid(dom, 0.5);
  ASSERT_GE(grid.size(), 3u);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    EXPECT_LE(grid.point(i + 1)[0] - grid.point(i)[0], 0.5);
    EXPECT_TRUE(dom.contains(grid.point(i)));
  }
  EXPECT_LT(covering_radius(dom, grid, 1001), 0.5);
}

TEST(BuildGrid, SquareCornersAreCovered) {
  const Domain dom = Domain::box({{0.0, 1.0}, {0.0, 1.0}});
  const CoveringGrid grid = build_grid(dom, 0.3);
  for (double a : {0.0, 1.0}) {
    for (double b : {0.0, 1.0}) {
      const Point corner{a, b};
      EXPECT_LT(distance(project_to_grid(corner, grid), corner), 0.3);
    }
  }
  EXPECT_LT(covering_radius(dom, grid, 100), 0.3);
}

TEST(BuildGrid, BallInOneDimension) {
  const Domain dom = Domain::ball({0.0}, 1.0);
  const CoveringGrid grid = build_grid(dom, 0.4);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_GT(grid.point(i)[0], -1.0);
    EXPECT_LT(grid.point(i)[0], 1.0);
  }
  EXPECT_LT(covering_radius(dom, grid, 2001), 0.4);
}

TEST(BuildGrid, DiskIsCovered) {
  const Domain dom = Domain::ball({0.5, -0.5}, 1.0);
  const CoveringGrid grid = build_grid(dom, 0.25);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_TRUE(dom.contains(grid.point(i)));
  EXPECT_LT(covering_radius(dom, grid, 120), 0.25);
}

TEST(BuildGrid, IsDeterministic) {
  const Domain dom = Domain::ball({0.0, 0.0}, 1.0);
  EXPECT_EQ(build_grid(dom, 0.2).coords(), build_grid(dom, 0.2).coords());
}

TEST(BuildGrid, OrderIsLexicographic) {
  const CoveringGrid grid = build_grid(Domain::box({{0.0, 1.0}, {0.0, 1.0}}), 0.5);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const auto a = grid.point(i), b = grid.point(i + 1);
    EXPECT_TRUE(a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]));
  }
}

TEST(BuildGrid, RejectsNonPositiveSpacing) {
  EXPECT_THROW(build_grid(Domain::box({{0.0, 1.0}}), 0.0), ConfigError);
  EXPECT_THROW(build_grid(Domain::box({{0.0, 1.0}}), -0.1), ConfigError);
}

TEST(BuildGrid, CoveringHoldsOnRandomSamples) {
  const Domain dom = Domain::box({{-1.0, 2.0}, {0.0, 0.5}});
  const double omega = 0.17;
  const CoveringGrid grid = build_grid(dom, omega);
  Rng rng(5);
  for (int t = 0; t < 2000; ++t) {
    const Point x{rng.uniform(-1.0, 2.0), rng.uniform(0.0, 0.5)};
    EXPECT_LT(distance(project_to_grid(x, grid), x), omega);
  }
}

TEST(ProjectToGrid, GridPointMapsToItself) {
  const CoveringGrid grid = build_grid(Domain::box({{0.0, 1.0}}), 0.3);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(project_to_grid(grid.point(i), grid), Point(grid.point(i).begin(), grid.point(i).end()));
  }
}

TEST(ProjectToGrid, NearestPoint) {
  const CoveringGrid grid(1, {0.0, 0.5, 1.0}, 0.5);
  EXPECT_EQ(project_to_grid(Point{0.26}, grid), Point{0.5});
  EXPECT_EQ(project_to_grid(Point{0.9}, grid), Point{1.0});
}

TEST(ProjectToGrid, TiesGoToEarlierGridPoint) {
  const CoveringGrid grid(1, {0.0, 0.5, 1.0}, 0.5);
  EXPECT_EQ(project_to_grid(Point{0.25}, grid), Point{0.0});
  EXPECT_EQ(project_to_grid(Point{0.75}, grid), Point{0.5});
}

TEST(ProjectToGrid, EmptyGridThrows) {
  const CoveringGrid grid(1, {}, 0.5);
  EXPECT_THROW(project_to_grid(Point{0.1}, grid), ConfigError);
}
