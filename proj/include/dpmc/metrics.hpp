#pragma once

#include <optional>
#include <vector>

#include "dpmc/gmm.hpp"
#include "dpmc/operators.hpp"
#include "dpmc/oracle.hpp"

namespace dpmc {

struct MetricReport {
  double sliced_w2 = 0.0;
  double mean_error = 0.0;
  double cov_frobenius_error = 0.0;
  double residual_mean = 0.0;
  std::optional<double> tv_grid;
  std::size_t n_samples = 0;
  int n_projections = 0;
  std::uint64_t seed = 0;
};

/// n_proj uniformly random unit directions.
std::vector<Vector> random_directions(int dim, int n_proj, Rng& rng);

/// Mean over directions of the exact 1-D W2 between the projected sets
/// (sorted pairing). Unequal sets are subsampled down to the smaller size.
double sliced_w2(const std::vector<Vector>& a, const std::vector<Vector>& b, int n_proj, Rng& rng);
double sliced_w2(const std::vector<Vector>& a, const std::vector<Vector>& b,
                 const std::vector<Vector>& directions, Rng& rng);

/// Exact 1-D W2 between equal-size samples.
double w2_1d(std::vector<double> a, std::vector<double> b);

struct MomentErrors {
  double mean_error = 0.0;           // ||mean(samples) - E[x]||
  double cov_frobenius_error = 0.0;  // ||cov(samples) - Cov[x]||_F
};
MomentErrors moment_report(const std::vector<Vector>& samples, const GaussianMixture& reference);

struct GridTV {
  double tv = 0.0;
  std::size_t overflow = 0;  // samples outside the grid
};
/// 0.5 * (sum |p_hat - p| + overflow fraction).
GridTV grid_tv(const std::vector<Vector>& samples, const GridDensity& density);

struct ResidualStats {
  double mean = 0.0;
  double max = 0.0;
};
ResidualStats residual_stats(const std::vector<Vector>& samples, const Measurement& meas);

}  // namespace dpmc
