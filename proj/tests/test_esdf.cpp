#include "tabv/esdf.hpp"
#include "tabv/world.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace tabv;

TEST(Esdf, EmptyGridUsesCap) {
  OccupancyGrid g(0.1, Vec3::Zero(), Vec3i(9, 9, 1));
  const EsdfGrid e = EsdfGrid::build(g);
  EXPECT_NEAR(e.cap(), 0.1 * std::sqrt(81.0 + 81.0 + 1.0), 1e-12);
  for (int j = 0; j < 9; ++j)
    for (int i = 0; i < 9; ++i) EXPECT_EQ(e.at(i, j, 0), e.cap());
}

TEST(Esdf, AllOccupiedRejected) {
  OccupancyGrid g(0.1, Vec3::Zero(), Vec3i(3, 3, 1));
  std::fill(g.cells.begin(), g.cells.end(), 1);
  EXPECT_THROW(EsdfGrid::build(g), Error);
}

TEST(Esdf, SingleSiteCorner) {
  OccupancyGrid g(0.2, Vec3::Zero(), Vec3i(9, 9, 1));
  g.set(4, 4, 0, true);
  const EsdfGrid e = EsdfGrid::build(g);
  EXPECT_NEAR(e.at(0, 0, 0), 0.2 * std::sqrt(32.0), 1e-12);
  EXPECT_EQ(e.at(4, 4, 0), 0.0);
}

TEST(Esdf, MatchesBruteForcePlanar) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const OccupancyGrid g = oracle::random_planar_grid(rng, 40, 0.05);
    const EsdfGrid e = EsdfGrid::build(g);
    const auto ref = oracle::brute_force_esdf(g);
    for (int j = 0; j < 40; ++j)
      for (int i = 0; i < 40; ++i) ASSERT_NEAR(e.at(i, j, 0), ref[g.index(i, j, 0)], 1e-9);
  }
}

TEST(Esdf, MatchesBruteForceVolumetric) {
  std::mt19937_64 rng(12);
  OccupancyGrid g(0.25, Vec3(-1, -1, 0), Vec3i(12, 10, 7));
  std::bernoulli_distribution occ(0.04);
  for (auto &c : g.cells) c = occ(rng);
  g.set(3, 3, 3, true);
  const EsdfGrid e = EsdfGrid::build(g);
  const auto ref = oracle::brute_force_esdf(g);
  for (std::size_t c = 0; c < g.size(); ++c) ASSERT_NEAR(e.at(c % 12, (c / 12) % 10, c / 120), ref[c], 1e-9);
}

TEST(Esdf, CellCenterAndMidpoint) {
  // Column of obstacles at i = 0: values are 0, 1, 2, ... times resolution.
  OccupancyGrid g(1.0, Vec3::Zero(), Vec3i(6, 4, 1));
  for (int j = 0; j < 4; ++j) g.set(0, j, 0, true);
  const EsdfGrid e = EsdfGrid::build(g);
  EXPECT_NEAR(e.query(g.cell_center(2, 1, 0)).dist, e.at(2, 1, 0), 1e-12);
  const Vec3 mid = 0.5 * (g.cell_center(1, 1, 0) + g.cell_center(2, 1, 0));
  EXPECT_NEAR(e.query(mid).dist, 1.5, 1e-12);
  EXPECT_TRUE(e.query(mid).in_bounds);
}

TEST(Esdf, GradientMatchesDifferences) {
  std::mt19937_64 rng(3);
  const OccupancyGrid g = oracle::random_planar_grid(rng, 30, 0.04);
  const EsdfGrid e = EsdfGrid::build(g);
  std::uniform_real_distribution<double> u(0.2, 2.8);
  const double h = 1e-7;
  for (int k = 0; k < 50; ++k) {
    const Vec3 p(u(rng), u(rng), 0.0);
    const DistQuery q = e.query(p);
    for (int a = 0; a < 2; ++a) {
      Vec3 dp = Vec3::Zero();
      dp(a) = h;
      const double fd = (e.query(p + dp).dist - e.query(p - dp).dist) / (2 * h);
      EXPECT_NEAR(q.grad(a), fd, 1e-5);
    }
  }
}

TEST(Esdf, OutOfBoundsClampedAndFlagged) {
  OccupancyGrid g(1.0, Vec3::Zero(), Vec3i(5, 5, 1));
  g.set(2, 2, 0, true);
  const EsdfGrid e = EsdfGrid::build(g);
  const DistQuery q = e.query(Vec3(-3.0, 2.5, 0.0));
  EXPECT_FALSE(q.in_bounds);
  EXPECT_EQ(q.grad.x(), 0.0);
  EXPECT_NEAR(q.dist, e.query(Vec3(0.0, 2.5, 0.0)).dist, 1e-12);
  const DistQuery pen = e.query_penalized(Vec3(-3.0, 2.5, 0.0));
  EXPECT_LT(pen.dist, q.dist);
  EXPECT_GT(pen.grad.x(), 0.0);
}

TEST(Esdf, GridFileRoundTrip) {
  std::mt19937_64 rng(5);
  const OccupancyGrid g = oracle::random_planar_grid(rng, 7, 0.3, 0.05);
  std::stringstream ss;
  write_grid(ss, g);
  const OccupancyGrid back = read_grid(ss);
  EXPECT_EQ(back.dims, g.dims);
  EXPECT_EQ(back.cells, g.cells);
  EXPECT_DOUBLE_EQ(back.resolution, g.resolution);
}

TEST(World, FenceBlocksGroundOnly) {
  const World w(make_fence(16.0, 8.0, 8.0, 1.0));
  const Vec3 on_wall(8.0, 4.0, 0.0);
  EXPECT_LT(w.clearance(on_wall, Mode::Terrestrial), 0.2);
  EXPECT_GT(w.clearance(Vec3(8.0, 4.0, 2.5), Mode::Aerial), 1.0);
}

TEST(World, ForestIsSeeded) {
  ForestParams fp;
  const WorldSpec a = make_forest(fp, 4), b = make_forest(fp, 4), c = make_forest(fp, 5);
  ASSERT_EQ(a.cylinders.size(), b.cylinders.size());
  for (std::size_t i = 0; i < a.cylinders.size(); ++i) EXPECT_EQ(a.cylinders[i].center, b.cylinders[i].center);
  EXPECT_NE(a.cylinders.front().center, c.cylinders.front().center);
  for (const auto &cyl : a.cylinders) {
    EXPECT_GT((cyl.center - fp.start).norm(), fp.keep_out);
    EXPECT_GT((cyl.center - fp.goal).norm(), fp.keep_out);
  }
}
