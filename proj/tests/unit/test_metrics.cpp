#include <gtest/gtest.h>

#include "dpmc/metrics.hpp"
#include "fixtures.hpp"

using namespace dpmc;
using dpmc::test::vec;

TEST(Metrics, W1dIsShiftForTranslatedSets) {
  EXPECT_NEAR(w2_1d({0, 1, 2}, {2.5, 0.5, 1.5}), 0.5, 1e-15);
  EXPECT_EQ(w2_1d({3, 1}, {1, 3}), 0.0);
  EXPECT_THROW(w2_1d({1}, {1, 2}), std::invalid_argument);
}

TEST(Metrics, SlicedW2ZeroOnIdenticalSetsAndShiftOtherwise) {
  Rng r(1);
  std::vector<Vector> a;
  for (int i = 0; i < 500; ++i) a.push_back(r.normal_vector(3));
  std::vector<Vector> b = a;
  for (auto& x : b) x += vec({0.3, 0.0, 0.0});
  Rng m(2);
  const auto dirs = random_directions(3, 64, m);
  for (const auto& d : dirs) EXPECT_NEAR(d.norm(), 1.0, 1e-12);
  EXPECT_EQ(sliced_w2(a, a, dirs, m), 0.0);
  double expect = 0;
  for (const auto& d : dirs) expect += std::abs(0.3 * d[0]);
  EXPECT_NEAR(sliced_w2(a, b, dirs, m), expect / 64, 1e-12);
}

TEST(Metrics, GridTvCountsOverflow) {
  GridDensity d{{{0.0}, {1.0}, {2}}, {0.5, 0.5}};
  EXPECT_NEAR(grid_tv({vec({0.2}), vec({0.7})}, d).tv, 0.0, 1e-15);
  const auto g = grid_tv({vec({0.2}), vec({5.0})}, d);
  EXPECT_EQ(g.overflow, 1u);
  EXPECT_NEAR(g.tv, 0.5, 1e-15);
}

TEST(Metrics, ResidualStats) {
  Measurement m;
  m.op = make_mask_operator(2, {0});
  m.y = vec({1.0});
  const auto s = residual_stats({vec({1.0, 9.0}), vec({3.0, 0.0})}, m);
  EXPECT_DOUBLE_EQ(s.mean, 1.0);
  EXPECT_DOUBLE_EQ(s.max, 2.0);
}
