#pragma once

#include <vector>

#include "dpmc/rng.hpp"

namespace dpmc {

/// Variance ladder of a discrete variance-preserving diffusion.
///
/// Levels are t = 1..T. Storage is 0-based, but every accessor takes the
/// 1-based level; bar_alpha(0) is the clean sentinel 1.
class NoiseSchedule {
 public:
  /// Validates the ladder: every beta in (0, 1) and finite.
  explicit NoiseSchedule(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const;
  double alpha(int t) const;
  double bar_alpha(int t) const;

  /// (1 - bar_alpha(t-1)) / (1 - bar_alpha(t)) * beta(t); zero at t = 1.
  double posterior_variance(int t) const;

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& bar_alphas() const { return bar_alphas_; }

 private:
  void check_level(int t, int lo) const;

  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> bar_alphas_;
};

NoiseSchedule make_linear_schedule(int steps, double beta_min, double beta_max);

/// Standard DDPM ladder: linear 1e-4 .. 0.02 over 1000 levels.
NoiseSchedule default_schedule();

/// A coarse sampling grid over a dense schedule. Level i in 1..S maps to the
/// dense level dense_index(i); level 0 maps to dense level 0. The coarse
/// ladder's betas are the effective per-jump variances
/// 1 - bar_alpha(dense_index(i)) / bar_alpha(dense_index(i-1)), so every
/// single-step formula applies to it unchanged.
class TimeGrid {
 public:
  TimeGrid(const NoiseSchedule& dense, int levels);

  int levels() const { return static_cast<int>(indices_.size()) - 1; }
  int dense_index(int level) const { return indices_.at(static_cast<std::size_t>(level)); }
  const NoiseSchedule& coarse() const { return coarse_; }

 private:
  std::vector<int> indices_;
  NoiseSchedule coarse_;
};

/// sqrt(bar_alpha) * x0 + sqrt(1 - bar_alpha) * noise.
Vector forward_marginal(const Vector& x0, int t, const Vector& noise, const NoiseSchedule& s);

/// -eps / sqrt(1 - bar_alpha). Undefined (throws) at t = 0.
Vector score_from_eps(const Vector& eps, int t, const NoiseSchedule& s);
Vector eps_from_score(const Vector& score, int t, const NoiseSchedule& s);

/// Posterior-mean denoiser (x_t - sqrt(1 - bar_alpha) eps) / sqrt(bar_alpha).
Vector tweedie_x0hat(const Vector& x_t, const Vector& eps, int t, const NoiseSchedule& s);

/// Ancestral step t -> t-1.
Vector ddpm_step(const Vector& x_t, const Vector& eps, int t, const Vector& z,
                 const NoiseSchedule& s);

/// Generalized DDIM jump t -> t_prev with injected noise scale sigma_ddim.
Vector ddim_step(const Vector& x_t, const Vector& eps, int t, int t_prev, double sigma_ddim,
                 const Vector& z, const NoiseSchedule& s);

}  // namespace dpmc
