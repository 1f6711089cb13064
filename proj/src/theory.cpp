#include "dpmc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace dpmc {

namespace {

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

LangevinBudget lemma1_budget(double m, double L, int d, double eps, double d_tv0) {
  if (!(m > 0.0) || !(L >= m) || !std::isfinite(L)) {
    throw std::invalid_argument("lemma1_budget: need 0 < m <= L");
  }
  if (d < 1) throw std::invalid_argument("lemma1_budget: d must be >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("lemma1_budget: eps must lie in (0, 1)");
  if (!(d_tv0 >= 0.0)) throw std::invalid_argument("lemma1_budget: d_tv0 must be >= 0");

  LangevinBudget b{m, L, d, eps, d_tv0, 0.0, 0};
  b.eta = m * eps * eps / (32.0 * L * d * d);
  if (d_tv0 > eps) {
    b.K = static_cast<long long>(
        std::ceil(32.0 * L * L * d * std::log(d_tv0 / eps) / (m * m * eps * eps)));
  }
  return b;
}

void TheoryParams::validate() const {
  if (!(L > 0.0) || d < 1) throw std::invalid_argument("TheoryParams: need L > 0 and d >= 1");
  if (!(h > 0.0) || !(h < std::min(1.0 / L, 1.0))) {
    throw std::invalid_argument("TheoryParams: h must lie in (0, min(1/L, 1))");
  }
  for (double v : {T_horizon, eps_score, eps_cond, U_cond, m2, C}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("TheoryParams: parameters must be finite and nonnegative");
    }
  }
}

double epsilon_inter(const TheoryParams& p, double eps, double eps_cond) {
  p.validate();
  const double sh = std::sqrt(p.h);
  return eps + eps_cond + p.C * sh * (p.L * std::sqrt(p.d * p.h) + p.L * p.m2 * p.h) +
         p.C * sh * (p.eps_score + p.U_cond);
}

LangevinBudget annealed_budget(const TheoryParams& params, double m, double eps,
                               double initial_tv) {
  const double inter = epsilon_inter(params, eps, params.eps_cond);
  return lemma1_budget(m, params.L, params.d, eps, std::max(initial_tv, inter));
}

double gaussian_tv(double mean_a, double std_a, double mean_b, double std_b) {
  if (!(std_a > 0.0) || !(std_b > 0.0)) throw std::invalid_argument("gaussian_tv: std must be > 0");
  if (std_a == std_b) {
    return 2.0 * normal_cdf(std::abs(mean_a - mean_b) / 2.0, 0.0, std_a) - 1.0;
  }
  const double lo = std::min(mean_a - 12 * std_a, mean_b - 12 * std_b);
  const double hi = std::max(mean_a + 12 * std_a, mean_b + 12 * std_b);
  const int n = 200000;  // Simpson, even
  const double h = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double f = std::abs(normal_pdf(x, mean_a, std_a) - normal_pdf(x, mean_b, std_b));
    acc += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return 0.5 * acc * h / 3.0;
}

TVCheck empirical_tv_check(double target_mean, double target_std, const LangevinBudget& budget,
                           double init_mean, double init_std, Rng& rng,
                           const TVCheckOptions& options) {
  if (!(target_std > 0.0) || !(init_std > 0.0)) {
    throw std::invalid_argument("empirical_tv_check: std must be positive");
  }
  if (options.n_chains < 1 || options.bins < 1) {
    throw std::invalid_argument("empirical_tv_check: need chains and bins");
  }
  const double prec = 1.0 / (target_std * target_std);
  const double noise = std::sqrt(2.0 * budget.eta);

  const double lo = target_mean - 6.0 * target_std;
  const double hi = target_mean + 6.0 * target_std;
  const double width = (hi - lo) / options.bins;
  std::vector<double> counts(static_cast<std::size_t>(options.bins) + 1, 0.0);  // last = overflow

  for (int c = 0; c < options.n_chains; ++c) {
    Rng chain = rng.derive("chain", static_cast<std::uint64_t>(c));
    double x = init_mean + init_std * chain.normal();
    for (long long k = 0; k < budget.K; ++k) {
      x += -budget.eta * prec * (x - target_mean) + noise * chain.normal();
    }
    const double pos = (x - lo) / width;
    const auto bin = (pos >= 0.0 && pos < options.bins) ? static_cast<std::size_t>(pos)
                                                        : static_cast<std::size_t>(options.bins);
    counts[bin] += 1.0;
  }

  TVCheck out;
  const double n = options.n_chains;
  double tv = 0.0;
  double noise_sum = 0.0;
  double inside = 0.0;
  for (int b = 0; b <= options.bins; ++b) {
    double p;
    if (b < options.bins) {
      p = normal_cdf(lo + (b + 1) * width, target_mean, target_std) -
          normal_cdf(lo + b * width, target_mean, target_std);
      inside += p;
    } else {
      p = std::max(0.0, 1.0 - inside);
    }
    tv += std::abs(counts[static_cast<std::size_t>(b)] / n - p);
    noise_sum += std::sqrt(p * (1.0 - p) / n);
  }
  out.tv_estimate = 0.5 * tv;
  out.allowance = 0.5 * options.noise_z * noise_sum;
  out.initial_tv = gaussian_tv(init_mean, init_std, target_mean, target_std);
  out.pass = out.tv_estimate <= budget.eps + out.allowance;
  return out;
}

}  // namespace dpmc
