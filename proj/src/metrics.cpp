#include "dpmc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dpmc {

std::vector<Vector> random_directions(int dim, int n_proj, Rng& rng) {
  if (dim < 1 || n_proj < 1) throw std::invalid_argument("random_directions: bad sizes");
  std::vector<Vector> dirs;
  dirs.reserve(static_cast<std::size_t>(n_proj));
  while (static_cast<int>(dirs.size()) < n_proj) {
    Vector u = rng.normal_vector(dim);
    const double n = u.norm();
    if (n > 0.0) dirs.push_back(u / n);
  }
  return dirs;
}

double w2_1d(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("w2_1d: need equal nonempty sets");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc / static_cast<double>(a.size()));
}

namespace {

std::vector<Vector> subsample(const std::vector<Vector>& x, std::size_t n, Rng& rng) {
  if (x.size() == n) return x;
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: first n positions become a uniform subset.
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<Vector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(x[idx[i]]);
  return out;
}

}  // namespace

double sliced_w2(const std::vector<Vector>& a, const std::vector<Vector>& b,
                 const std::vector<Vector>& directions, Rng& rng) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("sliced_w2: need >= 2 points each");
  if (directions.empty()) throw std::invalid_argument("sliced_w2: no directions");
  const auto dim = a.front().size();
  if (b.front().size() != dim) throw std::invalid_argument("sliced_w2: dimension mismatch");
  const std::size_t n = std::min(a.size(), b.size());
  const std::vector<Vector> aa = subsample(a, n, rng);
  const std::vector<Vector> bb = subsample(b, n, rng);

  double total = 0.0;
  std::vector<double> pa(n), pb(n);
  for (const Vector& u : directions) {
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = u.dot(aa[i]);
      pb[i] = u.dot(bb[i]);
    }
    total += w2_1d(pa, pb);
  }
  return total / static_cast<double>(directions.size());
}

double sliced_w2(const std::vector<Vector>& a, const std::vector<Vector>& b, int n_proj, Rng& rng) {
  if (a.empty() || b.empty()) throw std::invalid_argument("sliced_w2: empty input");
  Rng dir_rng = rng.derive("directions");
  const auto dirs = random_directions(static_cast<int>(a.front().size()), n_proj, dir_rng);
  Rng sub_rng = rng.derive("subsample");
  return sliced_w2(a, b, dirs, sub_rng);
}

MomentErrors moment_report(const std::vector<Vector>& samples, const GaussianMixture& reference) {
  if (samples.empty()) throw std::invalid_argument("moment_report: no samples");
  const auto d = samples.front().size();
  Vector mean = Vector::Zero(d);
  for (const auto& x : samples) mean += x;
  mean /= static_cast<double>(samples.size());
  Matrix cov = Matrix::Zero(d, d);
  for (const auto& x : samples) cov += (x - mean) * (x - mean).transpose();
  cov /= std::max<double>(1.0, static_cast<double>(samples.size()) - 1.0);
  return {(mean - reference.mean()).norm(), (cov - reference.covariance()).norm()};
}

GridTV grid_tv(const std::vector<Vector>& samples, const GridDensity& density) {
  if (samples.empty()) throw std::invalid_argument("grid_tv: no samples");
  std::vector<double> hist(density.mass.size(), 0.0);
  GridTV out;
  for (const auto& x : samples) {
    const long long c = density.spec.locate(x);
    if (c < 0) {
      ++out.overflow;
    } else {
      hist[static_cast<std::size_t>(c)] += 1.0;
    }
  }
  const double n = static_cast<double>(samples.size());
  double acc = static_cast<double>(out.overflow) / n;
  for (std::size_t i = 0; i < hist.size(); ++i) acc += std::abs(hist[i] / n - density.mass[i]);
  out.tv = std::min(1.0, 0.5 * acc);
  return out;
}

ResidualStats residual_stats(const std::vector<Vector>& samples, const Measurement& meas) {
  ResidualStats s;
  if (samples.empty()) return s;
  for (const auto& x : samples) {
    const double r = (meas.y - meas.op->apply(x)).norm();
    s.mean += r;
    s.max = std::max(s.max, r);
  }
  s.mean /= static_cast<double>(samples.size());
  return s;
}

}  // namespace dpmc
