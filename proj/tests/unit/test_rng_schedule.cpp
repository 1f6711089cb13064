#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "dpmc/rng.hpp"
#include "dpmc/schedule.hpp"
#include "fixtures.hpp"

using namespace dpmc;

TEST(Rng, SameKeySameStream) {
  Rng a(42, "chain", 3), b(42, "chain", 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, TagsAndIndicesSeparateStreams) {
  std::set<std::uint64_t> first;
  for (auto tag : {"x_true", "noise", "chain", "oracle", "metric"}) {
    for (std::uint64_t i = 0; i < 4; ++i) first.insert(Rng(7, tag, i)());
  }
  EXPECT_EQ(first.size(), 20u);
}

TEST(Rng, DeriveDoesNotAdvanceParent) {
  Rng a(1), b(1);
  (void)a.derive("child", 2);
  EXPECT_EQ(a(), b());
  EXPECT_EQ(a.derive("x")(), b.derive("x")());
}

TEST(Rng, NormalMoments) {
  Rng r(3, "moments");
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Schedule, LinearEndpointsAndSentinel) {
  const NoiseSchedule s = default_schedule();
  EXPECT_EQ(s.steps(), 1000);
  EXPECT_DOUBLE_EQ(s.beta(1), 1e-4);
  EXPECT_DOUBLE_EQ(s.beta(1000), 0.02);
  EXPECT_EQ(s.bar_alpha(0), 1.0);
  EXPECT_DOUBLE_EQ(s.bar_alpha(1), 1.0 - 1e-4);
  EXPECT_EQ(s.posterior_variance(1), 0.0);
  for (int t = 1; t <= 1000; ++t) EXPECT_LT(s.bar_alpha(t), s.bar_alpha(t - 1));
  EXPECT_LT(s.bar_alpha(1000), 1e-4);
}

TEST(Schedule, RejectsBadLadders) {
  EXPECT_THROW(NoiseSchedule({0.1, 1.0}), std::invalid_argument);
  EXPECT_THROW(NoiseSchedule({0.0}), std::invalid_argument);
  EXPECT_THROW(NoiseSchedule({NAN}), std::invalid_argument);
  EXPECT_THROW(default_schedule().beta(0), std::out_of_range);
  EXPECT_THROW(default_schedule().bar_alpha(1001), std::out_of_range);
}

TEST(TimeGrid, IndicesAndEffectiveBetas) {
  const NoiseSchedule s = default_schedule();
  const TimeGrid g(s, 200);
  EXPECT_EQ(g.levels(), 200);
  EXPECT_EQ(g.dense_index(0), 0);
  EXPECT_EQ(g.dense_index(1), 5);
  EXPECT_EQ(g.dense_index(200), 1000);
  for (int i = 1; i <= 200; ++i) {
    EXPECT_NEAR(g.coarse().bar_alpha(i), s.bar_alpha(g.dense_index(i)), 1e-12);
  }
  const TimeGrid full(s, 1000);
  for (int i = 1; i <= 1000; i += 97) EXPECT_NEAR(full.coarse().beta(i), s.beta(i), 1e-15);
}

TEST(Schedule, TweedieInvertsForwardWithTrueNoise) {
  const NoiseSchedule s = default_schedule();
  Rng r(5);
  const Vector x0 = r.normal_vector(3), e = r.normal_vector(3);
  for (int t : {1, 100, 999}) {
    const Vector xt = forward_marginal(x0, t, e, s);
    EXPECT_LT((tweedie_x0hat(xt, e, t, s) - x0).norm(), 1e-9 / std::sqrt(s.bar_alpha(t)));
    EXPECT_LT((eps_from_score(score_from_eps(e, t, s), t, s) - e).norm(), 1e-12);
  }
}

TEST(Schedule, DdimStepWithTrueNoiseLandsOnForwardMarginal) {
  const NoiseSchedule s = default_schedule();
  Rng r(6);
  const Vector x0 = r.normal_vector(2), e = r.normal_vector(2);
  const Vector xt = forward_marginal(x0, 500, e, s);
  const Vector prev = ddim_step(xt, e, 500, 400, 0.0, Vector::Zero(2), s);
  EXPECT_LT((prev - forward_marginal(x0, 400, e, s)).norm(), 1e-10);
}
