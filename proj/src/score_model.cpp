#include "dpmc/score_model.hpp"

#include <cmath>

namespace dpmc {

Vector ScoreModel::score(const Vector& x, int t) const {
  return score_from_eps(eps(x, t), t, schedule());
}

Vector ScoreModel::x0hat(const Vector& x, int t) const {
  return tweedie_x0hat(x, eps(x, t), t, schedule());
}

GmmScoreModel::GmmScoreModel(GaussianMixture prior, NoiseSchedule schedule)
    : prior_(std::move(prior)), schedule_(std::move(schedule)) {
  prior_.validate();
  levels_.reserve(static_cast<std::size_t>(schedule_.steps()) + 1);
  for (int t = 0; t <= schedule_.steps(); ++t) {
    levels_.emplace_back(gmm_marginal_params(prior_, t, schedule_));
  }
}

const MixtureDensity& GmmScoreModel::density_at(int t) const {
  (void)schedule_.bar_alpha(t);  // range check
  return levels_[static_cast<std::size_t>(t)];
}

Vector GmmScoreModel::score(const Vector& x, int t) const {
  return density_at(t).grad_log_density(x);
}

Vector GmmScoreModel::eps(const Vector& x, int t) const {
  return eps_from_score(score(x, t), t, schedule_);
}

Vector GmmScoreModel::x0hat(const Vector& x, int t) const {
  const double ab = schedule_.bar_alpha(t);
  return (x + (1.0 - ab) * score(x, t)) / std::sqrt(ab);
}

Vector GmmScoreModel::x0hat_vjp(const Vector& x, int t, const Vector& v) const {
  const double ab = schedule_.bar_alpha(t);
  return (v + (1.0 - ab) * density_at(t).hessian_vector(x, v)) / std::sqrt(ab);
}

Vector CountingModel::eps(const Vector& x, int t) const {
  ++count_;
  return inner_.eps(x, t);
}

Vector CountingModel::score(const Vector& x, int t) const {
  ++count_;
  return inner_.score(x, t);
}

Vector CountingModel::x0hat(const Vector& x, int t) const {
  ++count_;
  return inner_.x0hat(x, t);
}

Vector CountingModel::x0hat_vjp(const Vector& x, int t, const Vector& v) const {
  return inner_.x0hat_vjp(x, t, v);
}

}  // namespace dpmc
