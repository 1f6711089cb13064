#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "dpmc/gmm.hpp"
#include "dpmc/schedule.hpp"

namespace dpmc {

/// Prior model of a diffusion: epsilon prediction, score, Tweedie mean and the
/// vector-Jacobian product of the Tweedie mean. Levels t index schedule().
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual int dim() const = 0;
  virtual const NoiseSchedule& schedule() const = 0;

  virtual Vector eps(const Vector& x, int t) const = 0;
  virtual Vector score(const Vector& x, int t) const;
  virtual Vector x0hat(const Vector& x, int t) const;
  /// v^T d x0hat(x, t) / d x.
  virtual Vector x0hat_vjp(const Vector& x, int t, const Vector& v) const = 0;
};

/// Exact score of a Gaussian mixture pushed through the forward process.
/// Factorizations for every level are built once at construction.
class GmmScoreModel final : public ScoreModel {
 public:
  GmmScoreModel(GaussianMixture prior, NoiseSchedule schedule);

  int dim() const override { return prior_.dim(); }
  const NoiseSchedule& schedule() const override { return schedule_; }
  const GaussianMixture& prior() const { return prior_; }

  Vector eps(const Vector& x, int t) const override;
  /// Defined at t = 0 too (prior score).
  Vector score(const Vector& x, int t) const override;
  Vector x0hat(const Vector& x, int t) const override;
  Vector x0hat_vjp(const Vector& x, int t, const Vector& v) const override;

  const MixtureDensity& density_at(int t) const;

 private:
  GaussianMixture prior_;
  NoiseSchedule schedule_;
  std::vector<MixtureDensity> levels_;  // index t = 0..T
};

/// Forwarding wrapper that counts model evaluations (eps, score, x0hat).
/// VJPs reuse the evaluation they differentiate and are not counted.
class CountingModel final : public ScoreModel {
 public:
  explicit CountingModel(const ScoreModel& inner) : inner_(inner) {}

  int dim() const override { return inner_.dim(); }
  const NoiseSchedule& schedule() const override { return inner_.schedule(); }
  Vector eps(const Vector& x, int t) const override;
  Vector score(const Vector& x, int t) const override;
  Vector x0hat(const Vector& x, int t) const override;
  Vector x0hat_vjp(const Vector& x, int t, const Vector& v) const override;

  long long count() const { return count_; }

 private:
  const ScoreModel& inner_;
  mutable long long count_ = 0;
};

}  // namespace dpmc
