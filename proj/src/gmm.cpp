#include "dpmc/gmm.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dpmc {

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

Vector normalize_log_weights(const Vector& log_w) {
  Vector w = (log_w.array() - log_sum_exp(log_w)).exp().matrix();
  return w / w.sum();
}

void GaussianMixture::validate() const {
  const auto m = weights.size();
  if (m == 0) throw std::invalid_argument("GaussianMixture: no components");
  if (means.size() != static_cast<std::size_t>(m) ||
      covariances.size() != static_cast<std::size_t>(m)) {
    throw std::invalid_argument("GaussianMixture: weights/means/covariances length mismatch");
  }
  if (!weights.allFinite() || (weights.array() <= 0.0).any()) {
    throw std::invalid_argument("GaussianMixture: weights must be finite and positive");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("GaussianMixture: weights must sum to 1");
  }
  const auto d = means.front().size();
  if (d == 0) throw std::invalid_argument("GaussianMixture: zero dimension");
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& mu = means[static_cast<std::size_t>(k)];
    const auto& cov = covariances[static_cast<std::size_t>(k)];
    if (mu.size() != d || cov.rows() != d || cov.cols() != d) {
      throw std::invalid_argument("GaussianMixture: component " + std::to_string(k) +
                                  " has inconsistent dimension");
    }
    if (!mu.allFinite() || !cov.allFinite()) {
      throw std::invalid_argument("GaussianMixture: non-finite parameters");
    }
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + cov.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("GaussianMixture: covariance " + std::to_string(k) +
                                  " not symmetric");
    }
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("GaussianMixture: covariance " + std::to_string(k) +
                                  " not positive definite");
    }
  }
}

Vector GaussianMixture::mean() const {
  Vector mu = Vector::Zero(dim());
  for (int k = 0; k < components(); ++k) mu += weights[k] * means[static_cast<std::size_t>(k)];
  return mu;
}

Matrix GaussianMixture::covariance() const {
  const Vector mu = mean();
  Matrix c = Matrix::Zero(dim(), dim());
  for (int k = 0; k < components(); ++k) {
    const auto& m = means[static_cast<std::size_t>(k)];
    c += weights[k] * (covariances[static_cast<std::size_t>(k)] + m * m.transpose());
  }
  return c - mu * mu.transpose();
}

GaussianMixture single_gaussian(const Vector& mean, const Matrix& cov) {
  GaussianMixture g;
  g.weights = Vector::Ones(1);
  g.means = {mean};
  g.covariances = {cov};
  return g;
}

GaussianMixture gmm_marginal_params(const GaussianMixture& prior, int t, const NoiseSchedule& s) {
  if (t == 0) return prior;
  const double ab = s.bar_alpha(t);
  GaussianMixture out = prior;
  const auto d = prior.dim();
  for (std::size_t k = 0; k < out.means.size(); ++k) {
    out.means[k] = std::sqrt(ab) * prior.means[k];
    out.covariances[k] = ab * prior.covariances[k] + (1.0 - ab) * Matrix::Identity(d, d);
  }
  return out;
}

MixtureDensity::MixtureDensity(const GaussianMixture& gmm) : gmm_(gmm), dim_(gmm.dim()) {
  gmm_.validate();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  comps_.reserve(gmm_.means.size());
  for (int k = 0; k < gmm_.components(); ++k) {
    Component c{gmm_.means[static_cast<std::size_t>(k)],
                Eigen::LLT<Matrix>(gmm_.covariances[static_cast<std::size_t>(k)]), 0.0};
    const double log_det = 2.0 * c.chol.matrixLLT().diagonal().array().log().sum();
    c.log_norm = std::log(gmm_.weights[k]) - 0.5 * log_det - 0.5 * dim_ * log2pi;
    comps_.push_back(std::move(c));
  }
}

Vector MixtureDensity::component_log_joint(const Vector& x) const {
  Vector l(static_cast<Eigen::Index>(comps_.size()));
  for (std::size_t k = 0; k < comps_.size(); ++k) {
    const Vector diff = x - comps_[k].mean;
    const Vector half = comps_[k].chol.matrixL().solve(diff);
    l[static_cast<Eigen::Index>(k)] = comps_[k].log_norm - 0.5 * half.squaredNorm();
  }
  return l;
}

double MixtureDensity::log_density(const Vector& x) const {
  return log_sum_exp(component_log_joint(x));
}

Vector MixtureDensity::responsibilities(const Vector& x) const {
  Vector l = component_log_joint(x);
  const double lse = log_sum_exp(l);
  // Terms below exp(-745) underflow to zero; the max term is always exp(0) = 1.
  return (l.array() - lse).exp().matrix();
}

void MixtureDensity::local_scores(const Vector& x, std::vector<Vector>& g, Vector& r) const {
  r = responsibilities(x);
  g.resize(comps_.size());
  for (std::size_t k = 0; k < comps_.size(); ++k) {
    g[k] = -comps_[k].chol.solve(x - comps_[k].mean);
  }
}

Vector MixtureDensity::grad_log_density(const Vector& x) const {
  std::vector<Vector> g;
  Vector r;
  local_scores(x, g, r);
  Vector out = Vector::Zero(dim_);
  for (std::size_t k = 0; k < g.size(); ++k) out += r[static_cast<Eigen::Index>(k)] * g[k];
  return out;
}

// H = sum_k r_k (-Lambda_k) + sum_k r_k g_k g_k^T - gbar gbar^T
Vector MixtureDensity::hessian_vector(const Vector& x, const Vector& v) const {
  std::vector<Vector> g;
  Vector r;
  local_scores(x, g, r);
  Vector gbar = Vector::Zero(dim_);
  Vector out = Vector::Zero(dim_);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double rk = r[static_cast<Eigen::Index>(k)];
    if (rk == 0.0) continue;
    gbar += rk * g[k];
    out += rk * (g[k] * g[k].dot(v) - comps_[k].chol.solve(v));
  }
  out -= gbar * gbar.dot(v);
  return out;
}

Matrix MixtureDensity::hessian(const Vector& x) const {
  Matrix h(dim_, dim_);
  for (int j = 0; j < dim_; ++j) h.col(j) = hessian_vector(x, Vector::Unit(dim_, j));
  return h;
}

Vector gmm_score(const GaussianMixture& prior, const Vector& x, int t, const NoiseSchedule& s) {
  return MixtureDensity(gmm_marginal_params(prior, t, s)).grad_log_density(x);
}

Vector gmm_x0hat_vjp(const GaussianMixture& prior, const Vector& x, int t, const Vector& v,
                     const NoiseSchedule& s) {
  const double ab = s.bar_alpha(t);
  const MixtureDensity dens(gmm_marginal_params(prior, t, s));
  return (v + (1.0 - ab) * dens.hessian_vector(x, v)) / std::sqrt(ab);
}

}  // namespace dpmc
