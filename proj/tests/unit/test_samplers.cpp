#include <gtest/gtest.h>

#include <cmath>

#include "dpmc/oracle.hpp"
#include "dpmc/samplers.hpp"
#include "fixtures.hpp"

using namespace dpmc;
using dpmc::test::prior2d;
using dpmc::test::vec;

namespace {

Measurement mask_measurement(double y0) {
  Measurement m;
  m.op = make_mask_operator(2, {0});
  m.y = vec({y0});
  m.sigma = 0.05;
  m.rho = 400;
  return m;
}

}  // namespace

TEST(Nfe, HeadlineBudgets) {
  DPMCConfig c;
  c.T = 200;
  c.K = 4;
  EXPECT_EQ(nfe_of(c), 680);
  c.K = 6;
  EXPECT_EQ(nfe_of(c), 920);
  DPSConfig d;
  d.T = 1000;
  EXPECT_EQ(nfe_of(d), 1000);
  const auto w = window_counts(200, Window{});
  EXPECT_EQ(w.head, 60);
  EXPECT_EQ(w.middle, 120);
  EXPECT_EQ(w.tail, 20);
}

TEST(Nfe, WindowFloorsFractionalCounts) {
  const auto w = window_counts(7, Window{});
  EXPECT_EQ(w.head, 2);
  EXPECT_EQ(w.tail, 0);
  EXPECT_EQ(w.middle, 5);
  EXPECT_THROW(window_counts(10, Window{0.7, 0.2, 0.5}), std::invalid_argument);
}

TEST(Nfe, CountedEvaluationsMatchAccounting) {
  const GmmScoreModel m(prior2d(), default_schedule());
  const auto meas = mask_measurement(0.4);
  DPMCConfig c;
  c.T = 50;
  c.K = 3;
  c.restarts = 2;
  Rng r(1);
  const auto run = dpmc_sample(m, meas, c, r);
  EXPECT_EQ(run.nfe, nfe_of(c));
  EXPECT_EQ(run.candidates.size(), 2u);
  EXPECT_LE(run.residuals[run.best], run.residuals[1 - run.best]);
  DPSConfig d;
  d.T = 40;
  d.zeta = 0.1;
  EXPECT_EQ(dps_sample(m, meas, d, r).nfe, 40);
}

TEST(Samplers, ValidateRejectsBadConfigs) {
  DPMCConfig c;
  c.K = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = DPMCConfig{};
  c.window = Window{0.5, 0.5, 0.5};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = DPMCConfig{};
  c.restarts = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  DPSConfig d;
  d.zeta = -1;
  EXPECT_THROW(d.validate(), std::invalid_argument);
}

TEST(Samplers, SameStreamSameSample) {
  const GmmScoreModel m(prior2d(), default_schedule());
  const auto meas = mask_measurement(-1.0);
  DPMCConfig c;
  c.T = 40;
  Rng a(3, "chain", 0), b(3, "chain", 0), other(3, "chain", 1);
  const Vector x = dpmc_sample(m, meas, c, a).best_sample();
  EXPECT_EQ(x, dpmc_sample(m, meas, c, b).best_sample());
  EXPECT_NE(x, dpmc_sample(m, meas, c, other).best_sample());
}

TEST(Guidance, ZeroResidualGivesZeroGradient) {
  const GmmScoreModel m(prior2d(), default_schedule());
  auto meas = mask_measurement(0.0);
  const Vector x = vec({0.2, 0.1});
  meas.y = meas.op->apply(m.x0hat(x, 10));
  const auto g = guidance_grad(m, meas, x, 10);
  EXPECT_EQ(g.grad.norm(), 0.0);
}

TEST(Guidance, UsesPlainNormNormalization) {
  const GmmScoreModel m(prior2d(), default_schedule());
  const auto meas = mask_measurement(0.0);
  const Vector x = vec({0.2, 0.1});
  const Vector x0 = m.x0hat(x, 20);
  const auto g1 = guidance_from_residual(m, meas, x, 20, x0, vec({0.5}));
  const auto g2 = guidance_from_residual(m, meas, x, 20, x0, vec({5.0}));
  EXPECT_LT((g1.grad - g2.grad).norm(), 1e-12);
  EXPECT_NEAR(g2.residual_norm, 5.0, 1e-15);
}

TEST(Guidance, GuidedScoreWithZeroXiIsScore) {
  const GmmScoreModel m(prior2d(), default_schedule());
  const auto meas = mask_measurement(0.7);
  const Vector x = vec({0.3, -0.2});
  EXPECT_EQ(guided_score(m, meas, x, 100, 0.0), m.score(x, 100));
  EXPECT_THROW(guided_score(m, meas, x, 100, -1.0), std::invalid_argument);
}

TEST(Langevin, StationaryVarianceOfDiscreteChain) {
  // ULA on N(0, s^2) has stationary variance s^2 / (1 - eta / (2 s^2)).
  const double s2 = 0.5, eta = 0.05;
  const GmmScoreModel m(single_gaussian(vec({0.0}), Matrix::Constant(1, 1, s2)), default_schedule());
  Measurement meas;
  meas.op = make_mask_operator(1, {0});
  meas.y = vec({0.0});
  const int n = 20000;
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    Rng r(12, "ula", static_cast<std::uint64_t>(i));
    const Vector x = langevin_explore(m, meas, vec({0.0}), 0, 200, eta, 0.0, r);
    acc += x[0] * x[0];
  }
  const double expect = s2 / (1 - eta / (2 * s2));
  const double se = expect * std::sqrt(2.0 / n);
  EXPECT_NEAR(acc / n, expect, 4 * se);
}

TEST(Unconditional, MatchesPriorMoments) {
  const GmmScoreModel m(prior2d(), default_schedule());
  std::vector<Vector> xs;
  for (int i = 0; i < 3000; ++i) {
    Rng r(2, "chain", static_cast<std::uint64_t>(i));
    xs.push_back(unconditional_sample(m, 250, StepKind::ddpm, r));
  }
  Vector mean = Vector::Zero(2);
  for (const auto& x : xs) mean += x / 3000.0;
  EXPECT_LT((mean - prior2d().mean()).norm(), 0.1);
}

TEST(Samplers, RejectsMismatchedProblems) {
  const GmmScoreModel m(prior2d(), default_schedule());
  Measurement meas;
  meas.op = make_mask_operator(3, {0});
  meas.y = vec({0.0});
  DPSConfig d;
  Rng r(1);
  EXPECT_THROW(dps_sample(m, meas, d, r), std::invalid_argument);
  meas.op = make_mask_operator(2, {0});
  d.T = 2000;
  EXPECT_THROW(dps_sample(m, meas, d, r), std::invalid_argument);
}
