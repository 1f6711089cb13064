#include <gtest/gtest.h>

#include <cmath>

#include "dpmc/metrics.hpp"
#include "dpmc/oracle.hpp"
#include "dpmc/score_model.hpp"
#include "dpmc/verify.hpp"
#include "fixtures.hpp"

using namespace dpmc;
using dpmc::test::prior2d;
using dpmc::test::vec;

TEST(Gmm, ValidateRejectsBadMixtures) {
  GaussianMixture g = prior2d();
  g.weights = vec({0.3, 0.4, 0.4});
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = prior2d();
  g.covariances[1] = test::sym2(1.0, 2.0, 1.0);
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = prior2d();
  g.means.pop_back();
  EXPECT_THROW(g.validate(), std::invalid_argument);
  EXPECT_NO_THROW(prior2d().validate());
}

TEST(Gmm, MarginalAtZeroIsPrior) {
  const auto g = prior2d();
  const auto m = gmm_marginal_params(g, 0, default_schedule());
  EXPECT_EQ(m.weights, g.weights);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(m.covariances[k], g.covariances[k]);
}

TEST(Gmm, MarginalAtLastLevelIsNearlyStandardNormal) {
  const auto m = gmm_marginal_params(prior2d(), 1000, default_schedule());
  for (int k = 0; k < 3; ++k) {
    EXPECT_LT(m.means[k].norm(), 0.02);
    EXPECT_LT((m.covariances[k] - Matrix::Identity(2, 2)).norm(), 1e-4);
  }
}

TEST(Gmm, SingleGaussianScoreIsLinear) {
  const NoiseSchedule s = default_schedule();
  const auto g = single_gaussian(vec({1.0, -2.0}), test::sym2(0.5, 0.1, 0.4));
  const int t = 250;
  const double ab = s.bar_alpha(t);
  const Matrix C = ab * g.covariances[0] + (1 - ab) * Matrix::Identity(2, 2);
  const Vector x = vec({0.3, 0.7});
  const Vector expect = -C.inverse() * (x - std::sqrt(ab) * g.means[0]);
  EXPECT_LT((gmm_score(g, x, t, s) - expect).norm(), 1e-12);
}

TEST(Gmm, ScoreMatchesFiniteDifferences) {
  const NoiseSchedule s = default_schedule();
  const GmmScoreModel m(prior2d(), s);
  Rng r(11);
  for (int t : {0, 1, 50, 400, 999}) {
    const Vector x = 1.5 * r.normal_vector(2);
    const auto& d = m.density_at(t);
    EXPECT_LT(fd_gradient_error([&](const Vector& z) { return d.log_density(z); }, x, m.score(x, t)), 1e-6);
  }
}

TEST(Gmm, TweedieMeanIsPosteriorMeanOfCleanSignal) {
  // For a single Gaussian, E[x0 | xt] is closed form.
  const NoiseSchedule s = default_schedule();
  const auto g = single_gaussian(vec({0.5, 0.0}), test::sym2(0.3, 0.0, 0.2));
  const GmmScoreModel m(g, s);
  const int t = 300;
  const double ab = s.bar_alpha(t);
  const Vector x = vec({0.1, -0.4});
  const Matrix S = g.covariances[0];
  const Matrix C = ab * S + (1 - ab) * Matrix::Identity(2, 2);
  const Vector expect = g.means[0] + std::sqrt(ab) * S * C.inverse() * (x - std::sqrt(ab) * g.means[0]);
  EXPECT_LT((m.x0hat(x, t) - expect).norm(), 1e-10);
}

TEST(Gmm, LogWeightsSurviveExtremeOffsets) {
  const Vector w = normalize_log_weights(vec({-1000.0, -1001.0, -2000.0}));
  EXPECT_NEAR(w.sum(), 1.0, 1e-15);
  EXPECT_NEAR(w[0] / w[1], std::exp(1.0), 1e-12);
  EXPECT_EQ(w[2], 0.0);
}

TEST(Oracle, ZeroOperatorReturnsPrior) {
  const auto g = prior2d();
  const auto p = gmm_posterior(g, Matrix::Zero(1, 2), 0.05, vec({3.0}));
  EXPECT_LT((p.weights - g.weights).norm(), 1e-12);
  for (int k = 0; k < 3; ++k) {
    EXPECT_LT((p.means[k] - g.means[k]).norm(), 1e-12);
    EXPECT_LT((p.covariances[k] - g.covariances[k]).norm(), 1e-12);
  }
}

TEST(Oracle, ScalarConjugate) {
  const auto p = gmm_posterior(single_gaussian(vec({0.0}), Matrix::Identity(1, 1)), Matrix::Identity(1, 1),
                               0.5, vec({1.0}));
  EXPECT_NEAR(p.means[0][0], 0.8, 1e-14);
  EXPECT_NEAR(p.covariances[0](0, 0), 0.2, 1e-14);
}

TEST(Oracle, FullObservationConcentratesOnMeasurement) {
  const auto p = gmm_posterior(prior2d(), Matrix::Identity(2, 2), 1e-3, vec({0.2, 1.4}));
  const Vector mean = p.mean();
  EXPECT_LT((mean - vec({0.2, 1.4})).norm(), 1e-4);
  EXPECT_LT(p.covariance().norm(), 3e-6);
}

TEST(Oracle, PosteriorAtZeroEqualsPosterior) {
  const auto A = Matrix::Identity(1, 2);
  const auto a = gmm_posterior(prior2d(), A, 0.05, vec({0.4}));
  const auto b = gmm_posterior_at_t(prior2d(), A, 0.05, vec({0.4}), 0, default_schedule());
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.means[2], b.means[2]);
}

TEST(Oracle, RejectsShapeMismatch) {
  EXPECT_THROW(gmm_posterior(prior2d(), Matrix::Identity(1, 3), 0.05, vec({0.0})), std::invalid_argument);
  EXPECT_THROW(gmm_posterior(prior2d(), Matrix::Identity(1, 2), 0.0, vec({0.0})), std::invalid_argument);
}

TEST(Oracle, GridAgreesWithExactPosteriorForMask) {
  const auto g = prior2d();
  const auto op = make_mask_operator(2, {0});
  const auto post = gmm_posterior(g, op->matrix(), 0.05, vec({0.3}));
  const GridSpec spec{{-0.1, -4.5}, {0.7, 4.0}, {200, 200}};
  const MixtureDensity d(g);
  const auto grid = grid_posterior([&](const Vector& x) { return d.log_density(x); }, *op, 0.05, vec({0.3}), spec);
  EXPECT_LT(grid_total_variation(discretize(post, spec), grid), 1e-10);
}

TEST(Oracle, GridWithoutMassThrows) {
  const auto op = make_mask_operator(2, {0});
  const GridSpec g{{0, 0}, {1, 1}, {10, 10}};
  EXPECT_THROW(grid_posterior([](const Vector&) { return -INFINITY; }, *op, 0.05, vec({0.0}), g),
               std::runtime_error);
}

TEST(Oracle, GridFarFromThePriorStaysNormalized) {
  // Log-space shifting keeps tail grids finite instead of underflowing.
  const auto op = make_mask_operator(2, {0});
  const GridSpec far{{50, 50}, {51, 51}, {10, 10}};
  const MixtureDensity d(prior2d());
  const auto g = grid_posterior([&](const Vector& x) { return d.log_density(x); }, *op, 1e-3, vec({0.0}), far);
  double total = 0;
  for (double m : g.mass) total += m;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Oracle, GridSpecLocatesCells) {
  const GridSpec g{{0.0}, {1.0}, {4}};
  EXPECT_EQ(g.locate(vec({0.1})), 0);
  EXPECT_EQ(g.locate(vec({0.99})), 3);
  EXPECT_EQ(g.locate(vec({1.5})), -1);
  EXPECT_NEAR(g.center(2)[0], 0.625, 1e-15);
  EXPECT_THROW((GridSpec{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {2, 2, 2}}.validate()), std::invalid_argument);
}

TEST(Oracle, SampleMomentsMatchMixture) {
  Rng r(4, "moments");
  const auto g = prior2d();
  const auto xs = sample_gmm(g, 100000, r);
  const auto m = moment_report(xs, g);
  EXPECT_LT(m.mean_error, 0.015);
  EXPECT_LT(m.cov_frobenius_error, 0.03);
}
