#include "dpmc/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dpmc {

namespace {

void check_same_dim(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                ")");
  }
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw std::invalid_argument("NoiseSchedule: at least one level required");
  alphas_.reserve(betas_.size());
  bar_alphas_.reserve(betas_.size());
  double running = 1.0;
  for (double b : betas_) {
    if (!std::isfinite(b) || b <= 0.0 || b >= 1.0) {
      throw std::invalid_argument("NoiseSchedule: beta must lie in (0, 1), got " +
                                  std::to_string(b));
    }
    alphas_.push_back(1.0 - b);
    running *= 1.0 - b;
    bar_alphas_.push_back(running);
  }
}

void NoiseSchedule::check_level(int t, int lo) const {
  if (t < lo || t > steps()) {
    throw std::out_of_range("NoiseSchedule: level " + std::to_string(t) + " outside [" +
                            std::to_string(lo) + ", " + std::to_string(steps()) + "]");
  }
}

double NoiseSchedule::beta(int t) const {
  check_level(t, 1);
  return betas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha(int t) const {
  check_level(t, 1);
  return alphas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::bar_alpha(int t) const {
  check_level(t, 0);
  return t == 0 ? 1.0 : bar_alphas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::posterior_variance(int t) const {
  return (1.0 - bar_alpha(t - 1)) / (1.0 - bar_alpha(t)) * beta(t);
}

NoiseSchedule make_linear_schedule(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw std::invalid_argument("make_linear_schedule: steps must be >= 1");
  if (!std::isfinite(beta_min) || !std::isfinite(beta_max) || beta_min <= 0.0 ||
      beta_max >= 1.0 || beta_min > beta_max) {
    throw std::invalid_argument("make_linear_schedule: need 0 < beta_min <= beta_max < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    betas[static_cast<std::size_t>(i)] = beta_min + (beta_max - beta_min) * frac;
  }
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule default_schedule() { return make_linear_schedule(1000, 1e-4, 0.02); }

namespace {

std::vector<int> even_indices(int dense_steps, int levels) {
  if (levels < 1 || levels > dense_steps) {
    throw std::invalid_argument("TimeGrid: levels must lie in [1, " +
                                std::to_string(dense_steps) + "], got " +
                                std::to_string(levels));
  }
  std::vector<int> idx(static_cast<std::size_t>(levels) + 1);
  for (int i = 0; i <= levels; ++i) {
    // round(i * dense / levels); strictly increasing since levels <= dense.
    const long long num = 2LL * i * dense_steps + levels;
    idx[static_cast<std::size_t>(i)] = static_cast<int>(num / (2LL * levels));
  }
  return idx;
}

std::vector<double> coarse_betas(const NoiseSchedule& dense, const std::vector<int>& idx) {
  std::vector<double> betas;
  betas.reserve(idx.size() - 1);
  for (std::size_t i = 1; i < idx.size(); ++i) {
    betas.push_back(1.0 - dense.bar_alpha(idx[i]) / dense.bar_alpha(idx[i - 1]));
  }
  return betas;
}

}  // namespace

TimeGrid::TimeGrid(const NoiseSchedule& dense, int levels)
    : indices_(even_indices(dense.steps(), levels)), coarse_(coarse_betas(dense, indices_)) {}

Vector forward_marginal(const Vector& x0, int t, const Vector& noise, const NoiseSchedule& s) {
  check_same_dim(x0, noise, "forward_marginal");
  const double ab = s.bar_alpha(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

Vector score_from_eps(const Vector& eps, int t, const NoiseSchedule& s) {
  if (t == 0) throw std::domain_error("score_from_eps: undefined at t = 0");
  return -eps / std::sqrt(1.0 - s.bar_alpha(t));
}

Vector eps_from_score(const Vector& score, int t, const NoiseSchedule& s) {
  return -std::sqrt(1.0 - s.bar_alpha(t)) * score;
}

Vector tweedie_x0hat(const Vector& x_t, const Vector& eps, int t, const NoiseSchedule& s) {
  check_same_dim(x_t, eps, "tweedie_x0hat");
  const double ab = s.bar_alpha(t);
  return (x_t - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
}

Vector ddpm_step(const Vector& x_t, const Vector& eps, int t, const Vector& z,
                 const NoiseSchedule& s) {
  if (t < 1) throw std::domain_error("ddpm_step: t must be >= 1");
  check_same_dim(x_t, eps, "ddpm_step");
  check_same_dim(x_t, z, "ddpm_step");
  const double beta = s.beta(t);
  const double mean_coef = beta / std::sqrt(1.0 - s.bar_alpha(t));
  Vector out = (x_t - mean_coef * eps) / std::sqrt(1.0 - beta);
  const double var = s.posterior_variance(t);
  if (var > 0.0) out += std::sqrt(var) * z;
  return out;
}

Vector ddim_step(const Vector& x_t, const Vector& eps, int t, int t_prev, double sigma_ddim,
                 const Vector& z, const NoiseSchedule& s) {
  if (t_prev < 0 || t_prev >= t) throw std::invalid_argument("ddim_step: need 0 <= t_prev < t");
  check_same_dim(x_t, eps, "ddim_step");
  const double ab_prev = s.bar_alpha(t_prev);
  const double sig2 = sigma_ddim * sigma_ddim;
  const double room = 1.0 - ab_prev;
  // Tolerate rounding when sigma^2 is set to exactly the posterior variance.
  if (!(sig2 <= room * (1.0 + 1e-12) + 1e-300)) {
    throw std::invalid_argument("ddim_step: sigma_ddim^2 exceeds 1 - bar_alpha(t_prev)");
  }
  const Vector x0 = tweedie_x0hat(x_t, eps, t, s);
  Vector out = std::sqrt(ab_prev) * x0 + std::sqrt(std::max(room - sig2, 0.0)) * eps;
  if (sigma_ddim != 0.0) {
    check_same_dim(x_t, z, "ddim_step");
    out += sigma_ddim * z;
  }
  return out;
}

}  // namespace dpmc
