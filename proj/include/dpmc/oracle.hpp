#pragma once

#include <functional>
#include <vector>

#include "dpmc/gmm.hpp"
#include "dpmc/operators.hpp"

namespace dpmc {

/// Exact posterior of a Gaussian-mixture prior under y = A x + N(0, sigma^2 I).
/// Per component (Kalman form of the conjugate update):
///   S = A Sigma A^T + sigma^2 I,  G = Sigma A^T S^-1,
///   mu' = mu + G (y - A mu),      Sigma' = Sigma - G A Sigma,
///   log w' = log w + log N(y; A mu, S), normalized in log space.
GaussianMixture gmm_posterior(const GaussianMixture& prior, const Matrix& A, double sigma,
                              const Vector& y);

/// p_t(x_t | y): the exact posterior pushed through the forward process.
GaussianMixture gmm_posterior_at_t(const GaussianMixture& prior, const Matrix& A, double sigma,
                                   const Vector& y, int t, const NoiseSchedule& s);

/// Cell-centered grid over at most two axes.
struct GridSpec {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<int> cells;

  int dims() const { return static_cast<int>(cells.size()); }
  long long total_cells() const;
  Vector center(long long flat) const;
  /// Flat index of the cell containing x, or -1 when outside.
  long long locate(const Vector& x) const;
  void validate() const;
};

struct GridDensity {
  GridSpec spec;
  std::vector<double> mass;  // normalized, row-major with axis 0 slowest
};

/// Brute force: mass_c proportional to exp(log_prior(c) - ||y - A(c)||^2 / (2 sigma^2)).
/// Throws when every cell underflows.
GridDensity grid_posterior(const std::function<double(const Vector&)>& log_prior,
                           const ForwardOperator& op, double sigma, const Vector& y,
                           const GridSpec& spec);

/// Mixture density evaluated at cell centers and normalized.
GridDensity discretize(const GaussianMixture& gmm, const GridSpec& spec);

/// Total variation 0.5 * sum |p - q| between two densities on the same grid.
double grid_total_variation(const GridDensity& p, const GridDensity& q);

/// n draws: categorical component then mu + L z with L the Cholesky factor.
std::vector<Vector> sample_gmm(const GaussianMixture& gmm, std::size_t n, Rng& rng);

/// n draws from a grid density: categorical cell, then uniform within the cell.
std::vector<Vector> sample_grid(const GridDensity& density, std::size_t n, Rng& rng);

}  // namespace dpmc
