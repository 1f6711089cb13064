#include "dpmc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dpmc {

GaussianMixture gmm_posterior(const GaussianMixture& prior, const Matrix& A, double sigma,
                              const Vector& y) {
  prior.validate();
  if (A.cols() != prior.dim() || A.rows() != y.size()) {
    throw std::invalid_argument("gmm_posterior: operator shape does not match prior / y");
  }
  if (!A.allFinite() || !y.allFinite()) throw std::invalid_argument("gmm_posterior: non-finite input");
  if (!(sigma > 0.0)) throw std::invalid_argument("gmm_posterior: sigma must be positive");

  const auto d = y.size();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  GaussianMixture post = prior;
  Vector log_w(prior.components());
  for (int k = 0; k < prior.components(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const Matrix& cov = prior.covariances[kk];
    const Vector& mu = prior.means[kk];
    const Matrix cov_at = cov * A.transpose();  // Sigma A^T
    Matrix S = A * cov_at;
    S.diagonal().array() += sigma * sigma;
    const Eigen::LLT<Matrix> chol(S);
    if (chol.info() != Eigen::Success) {
      throw std::runtime_error("gmm_posterior: singular innovation covariance");
    }
    const Vector innov = y - A * mu;
    const Matrix gain_t = chol.solve(cov_at.transpose());  // (Sigma A^T S^-1)^T
    post.means[kk] = mu + gain_t.transpose() * innov;
    Matrix c = cov - gain_t.transpose() * cov_at.transpose();
    post.covariances[kk] = 0.5 * (c + c.transpose());

    const Vector half = chol.matrixL().solve(innov);
    const double log_det = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
    log_w[k] = std::log(prior.weights[k]) - 0.5 * (half.squaredNorm() + log_det + d * log2pi);
  }
  post.weights = normalize_log_weights(log_w);
  return post;
}

GaussianMixture gmm_posterior_at_t(const GaussianMixture& prior, const Matrix& A, double sigma,
                                   const Vector& y, int t, const NoiseSchedule& s) {
  return gmm_marginal_params(gmm_posterior(prior, A, sigma, y), t, s);
}

// ------------------------------------------------------------------- grids

void GridSpec::validate() const {
  if (cells.empty() || cells.size() > 2) throw std::invalid_argument("GridSpec: 1 or 2 axes");
  if (lo.size() != cells.size() || hi.size() != cells.size()) {
    throw std::invalid_argument("GridSpec: lo/hi/cells length mismatch");
  }
  for (std::size_t a = 0; a < cells.size(); ++a) {
    if (cells[a] < 1 || !(hi[a] > lo[a]) || !std::isfinite(lo[a]) || !std::isfinite(hi[a])) {
      throw std::invalid_argument("GridSpec: invalid axis");
    }
  }
  if (total_cells() > 1'000'000) throw std::invalid_argument("GridSpec: at most 1e6 cells");
}

long long GridSpec::total_cells() const {
  long long n = 1;
  for (int c : cells) n *= c;
  return n;
}

Vector GridSpec::center(long long flat) const {
  Vector x(dims());
  for (int a = dims() - 1; a >= 0; --a) {
    const auto ua = static_cast<std::size_t>(a);
    const long long i = flat % cells[ua];
    flat /= cells[ua];
    const double w = (hi[ua] - lo[ua]) / cells[ua];
    x[a] = lo[ua] + (static_cast<double>(i) + 0.5) * w;
  }
  return x;
}

long long GridSpec::locate(const Vector& x) const {
  if (x.size() != dims()) throw std::invalid_argument("GridSpec::locate: dimension mismatch");
  long long flat = 0;
  for (int a = 0; a < dims(); ++a) {
    const auto ua = static_cast<std::size_t>(a);
    if (!(x[a] >= lo[ua] && x[a] < hi[ua])) return -1;
    const double w = (hi[ua] - lo[ua]) / cells[ua];
    const long long i = std::min<long long>(cells[ua] - 1, static_cast<long long>((x[a] - lo[ua]) / w));
    flat = flat * cells[ua] + i;
  }
  return flat;
}

namespace {

GridDensity normalize_log(const GridSpec& spec, std::vector<double> logm) {
  const double mx = *std::max_element(logm.begin(), logm.end());
  if (!std::isfinite(mx)) throw std::runtime_error("grid density: grid misses the support");
  double sum = 0.0;
  for (double& v : logm) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logm) v /= sum;
  return GridDensity{spec, std::move(logm)};
}

}  // namespace

GridDensity grid_posterior(const std::function<double(const Vector&)>& log_prior,
                           const ForwardOperator& op, double sigma, const Vector& y,
                           const GridSpec& spec) {
  spec.validate();
  if (op.in_dim() != spec.dims()) throw std::invalid_argument("grid_posterior: operator dimension");
  if (!(sigma > 0.0)) throw std::invalid_argument("grid_posterior: sigma must be positive");
  const long long n = spec.total_cells();
  std::vector<double> logm(static_cast<std::size_t>(n));
  const double inv2s2 = 0.5 / (sigma * sigma);
  for (long long c = 0; c < n; ++c) {
    const Vector x = spec.center(c);
    logm[static_cast<std::size_t>(c)] = log_prior(x) - inv2s2 * (y - op.apply(x)).squaredNorm();
  }
  return normalize_log(spec, std::move(logm));
}

GridDensity discretize(const GaussianMixture& gmm, const GridSpec& spec) {
  spec.validate();
  const MixtureDensity dens(gmm);
  if (dens.dim() != spec.dims()) throw std::invalid_argument("discretize: dimension mismatch");
  const long long n = spec.total_cells();
  std::vector<double> logm(static_cast<std::size_t>(n));
  for (long long c = 0; c < n; ++c) logm[static_cast<std::size_t>(c)] = dens.log_density(spec.center(c));
  return normalize_log(spec, std::move(logm));
}

double grid_total_variation(const GridDensity& p, const GridDensity& q) {
  if (p.mass.size() != q.mass.size()) throw std::invalid_argument("grid TV: grid mismatch");
  double tv = 0.0;
  for (std::size_t i = 0; i < p.mass.size(); ++i) tv += std::abs(p.mass[i] - q.mass[i]);
  return 0.5 * tv;
}

std::vector<Vector> sample_gmm(const GaussianMixture& gmm, std::size_t n, Rng& rng) {
  gmm.validate();
  std::vector<Matrix> factors;
  for (const auto& c : gmm.covariances) factors.push_back(Eigen::LLT<Matrix>(c).matrixL());
  std::vector<double> cdf(static_cast<std::size_t>(gmm.components()));
  double acc = 0.0;
  for (int k = 0; k < gmm.components(); ++k) cdf[static_cast<std::size_t>(k)] = (acc += gmm.weights[k]);

  std::vector<Vector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * acc;
    const auto k = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(),
                                 gmm.components() - 1));
    out.push_back(gmm.means[k] + factors[k] * rng.normal_vector(gmm.dim()));
  }
  return out;
}

std::vector<Vector> sample_grid(const GridDensity& density, std::size_t n, Rng& rng) {
  std::vector<double> cdf(density.mass.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = (acc += density.mass[i]);
  const GridSpec& g = density.spec;
  std::vector<Vector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * acc;
    const auto c = std::min<std::ptrdiff_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(),
                                            static_cast<std::ptrdiff_t>(cdf.size()) - 1);
    Vector x = g.center(c);
    for (int a = 0; a < g.dims(); ++a) {
      const auto ua = static_cast<std::size_t>(a);
      x[a] += (rng.uniform() - 0.5) * (g.hi[ua] - g.lo[ua]) / g.cells[ua];
    }
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace dpmc
