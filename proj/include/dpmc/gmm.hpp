#pragma once

#include <vector>

#include "dpmc/rng.hpp"
#include "dpmc/schedule.hpp"

namespace dpmc {

/// Weighted sum of full-covariance Gaussians in R^D.
struct GaussianMixture {
  Vector weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }

  /// Throws std::invalid_argument unless weights are a positive simplex
  /// (sum within 1e-12) and every covariance is symmetric positive definite.
  void validate() const;

  Vector mean() const;
  Matrix covariance() const;
};

GaussianMixture single_gaussian(const Vector& mean, const Matrix& cov);

/// Pushes the mixture through q(x_t | x_0): component k becomes
/// N(sqrt(ab) mu_k, ab Sigma_k + (1 - ab) I). t = 0 returns the input.
GaussianMixture gmm_marginal_params(const GaussianMixture& prior, int t, const NoiseSchedule& s);

/// Cholesky-factored mixture for repeated density, gradient and Hessian
/// evaluation. Immutable once built.
class MixtureDensity {
 public:
  explicit MixtureDensity(const GaussianMixture& gmm);

  int dim() const { return dim_; }
  const GaussianMixture& mixture() const { return gmm_; }

  double log_density(const Vector& x) const;
  Vector grad_log_density(const Vector& x) const;
  /// H v where H is the Hessian of log density at x.
  Vector hessian_vector(const Vector& x, const Vector& v) const;
  Matrix hessian(const Vector& x) const;
  /// Component posterior probabilities r_k(x), log-sum-exp stabilized.
  Vector responsibilities(const Vector& x) const;

  /// Per-component log N(x; m_k, C_k) + log w_k.
  Vector component_log_joint(const Vector& x) const;

 private:
  struct Component {
    Vector mean;
    Eigen::LLT<Matrix> chol;
    double log_norm;  // log w_k - 0.5 log det C_k - 0.5 D log 2 pi
  };
  /// -Lambda_k (x - m_k) for each k, plus responsibilities.
  void local_scores(const Vector& x, std::vector<Vector>& g, Vector& r) const;

  GaussianMixture gmm_;
  int dim_;
  std::vector<Component> comps_;
};

/// Closed-form score of the noised mixture p_t at x.
Vector gmm_score(const GaussianMixture& prior, const Vector& x, int t, const NoiseSchedule& s);

/// v^T d x0hat / d x_t for the analytic mixture, using
/// d x0hat / dx = (I + (1 - ab) H(x)) / sqrt(ab).
Vector gmm_x0hat_vjp(const GaussianMixture& prior, const Vector& x, int t, const Vector& v,
                     const NoiseSchedule& s);

double log_sum_exp(const Vector& v);
/// exp(l - logsumexp(l)), renormalized; invariant to adding a constant to l.
Vector normalize_log_weights(const Vector& log_w);

}  // namespace dpmc
