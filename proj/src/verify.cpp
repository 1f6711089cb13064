#include "dpmc/verify.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "dpmc/denoiser.hpp"
#include "dpmc/metrics.hpp"
#include "dpmc/oracle.hpp"
#include "dpmc/samplers.hpp"
#include "dpmc/theory.hpp"

namespace dpmc {

namespace {

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

GaussianMixture random_gmm(int dim, int k, Rng& rng) {
  GaussianMixture g;
  g.weights = Vector(k);
  for (int i = 0; i < k; ++i) g.weights[i] = 0.2 + rng.uniform();
  g.weights /= g.weights.sum();
  for (int i = 0; i < k; ++i) {
    g.means.push_back(1.5 * rng.normal_vector(dim));
    Matrix B(dim, dim);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) B(r, c) = rng.normal();
    }
    g.covariances.push_back(0.15 * B * B.transpose() / dim + 0.1 * Matrix::Identity(dim, dim));
  }
  return g;
}

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

struct NamedOp {
  std::string name;
  OperatorPtr op;
};

OperatorPtr wrap(const VerifyOptions& o, OperatorPtr op) {
  return o.wrap_operator ? o.wrap_operator(std::move(op)) : op;
}

std::vector<NamedOp> linear_ops_2d(const VerifyOptions& o, Rng& rng) {
  return {{"mask", wrap(o, make_mask_operator(2, {0}))},
          {"downsample", wrap(o, make_downsample_operator(2, 2))},
          {"blur", wrap(o, make_blur_operator(2, (Vector(2) << 0.7, 0.3).finished()))},
          {"dense", wrap(o, make_dense_operator(random_matrix(2, 2, rng)))},
          {"zero", wrap(o, make_dense_operator(Matrix::Zero(1, 2)))}};
}

GridSpec covering_grid(const GaussianMixture& g, int cells) {
  GridSpec s{{INFINITY, INFINITY}, {-INFINITY, -INFINITY}, {cells, cells}};
  for (int k = 0; k < g.components(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    for (int a = 0; a < 2; ++a) {
      const double sd = std::sqrt(g.covariances[kk](a, a));
      s.lo[static_cast<std::size_t>(a)] = std::min(s.lo[static_cast<std::size_t>(a)], g.means[kk][a] - 8 * sd);
      s.hi[static_cast<std::size_t>(a)] = std::max(s.hi[static_cast<std::size_t>(a)], g.means[kk][a] + 8 * sd);
    }
  }
  return s;
}

// Exact rationals for the lemma1_budget arithmetic check.
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational(long long n = 0, long long d = 1) : num(n), den(d) {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  Rational operator*(const Rational& o) const { return {num * o.num, den * o.den}; }
  Rational operator/(const Rational& o) const { return {num * o.den, den * o.num}; }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

}  // namespace

double fd_gradient_error(const std::function<double(const Vector&)>& f, const Vector& x,
                         const Vector& g, double h) {
  Vector fd(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    fd[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return (fd - g).norm() / std::max(g.norm(), 1e-8);
}

std::vector<CheckResult> verify_oracle(const VerifyOptions& options) {
  std::vector<CheckResult> out;
  Rng rng(options.seed, "verify.oracle");
  const double sigma = 0.05;

  for (const auto& [name, op] : linear_ops_2d(options, rng)) {
    const GaussianMixture prior = random_gmm(2, 3, rng);
    const Vector x_true = sample_gmm(prior, 1, rng).front();
    Rng noise = rng.derive("noise", out.size());
    const Measurement meas = make_measurement(x_true, op, sigma, noise);
    const GaussianMixture post = gmm_posterior(prior, op->matrix(), sigma, meas.y);
    const GridSpec grid = covering_grid(post, 400);
    const MixtureDensity pd(prior);
    const GridDensity brute =
        grid_posterior([&](const Vector& x) { return pd.log_density(x); }, *op, sigma, meas.y, grid);
    const double tv = grid_total_variation(discretize(post, grid), brute);
    out.push_back({"oracle.posterior_vs_grid." + name, tv <= 1e-3, fmt("tv=%.3g (limit %.0e)", tv, 1e-3)});
  }

  {
    const double s = 0.3, y = 0.7;
    const auto post = gmm_posterior(single_gaussian(Vector::Zero(1), Matrix::Identity(1, 1)),
                                    Matrix::Identity(1, 1), s, Vector::Constant(1, y));
    const double em = y / (1 + s * s), ev = s * s / (1 + s * s);
    const double err = std::max(std::abs(post.means[0][0] - em), std::abs(post.covariances[0](0, 0) - ev));
    out.push_back({"oracle.scalar_conjugate", err <= 1e-12, fmt("max err=%.3g (limit %.0e)", err, 1e-12)});
  }

  {
    const GaussianMixture prior = random_gmm(2, 3, rng);
    const Matrix A = random_matrix(1, 2, rng);
    const Vector y = Vector::Constant(1, 0.4);
    const auto a = gmm_posterior(prior, A, sigma, y);
    const auto b = gmm_posterior_at_t(prior, A, sigma, y, 0, default_schedule());
    bool same = a.weights == b.weights;
    for (int k = 0; k < a.components(); ++k) {
      const auto kk = static_cast<std::size_t>(k);
      same = same && a.means[kk] == b.means[kk] && a.covariances[kk] == b.covariances[kk];
    }
    out.push_back({"oracle.t0_composition", same, same ? "identical" : "fields differ"});
  }

  {
    const Vector lw = rng.normal_vector(5) * 3.0;
    const Vector w = normalize_log_weights(lw);
    const double up = (normalize_log_weights(lw.array() + 700.0) - w).cwiseAbs().maxCoeff();
    const double down = (normalize_log_weights(lw.array() - 700.0) - w).cwiseAbs().maxCoeff();
    const double drift = std::max(up, down);
    out.push_back({"oracle.log_shift_invariance", drift <= 1e-12, fmt("drift=%.3g (limit %.0e)", drift, 1e-12)});
  }

  {
    // Forward-noised posterior draws vs direct draws of p_t(x | y). The floor
    // is mean + 3 sd of independent direct-vs-direct distances.
    const GaussianMixture prior = random_gmm(2, 3, rng);
    const NoiseSchedule s = default_schedule();
    const Matrix A = Matrix::Identity(1, 2);
    const Vector y = Vector::Constant(1, prior.means[0][0]);
    const int t = 300;
    const std::size_t n = 4000;
    const auto post = gmm_posterior(prior, A, sigma, y);
    const auto post_t = gmm_posterior_at_t(prior, A, sigma, y, t, s);
    Rng dirs_rng = rng.derive("dirs");
    const auto dirs = random_directions(2, 64, dirs_rng);
    Rng draw = rng.derive("two_path");
    std::vector<Vector> noised = sample_gmm(post, n, draw);
    for (auto& x : noised) x = forward_marginal(x, t, draw.normal_vector(2), s);
    Rng sub = rng.derive("sub");
    const double w = sliced_w2(noised, sample_gmm(post_t, n, draw), dirs, sub);
    std::vector<double> floors;
    for (int r = 0; r < 8; ++r) floors.push_back(sliced_w2(sample_gmm(post_t, n, draw), sample_gmm(post_t, n, draw), dirs, sub));
    const double mean = std::accumulate(floors.begin(), floors.end(), 0.0) / floors.size();
    double var = 0.0;
    for (double f : floors) var += (f - mean) * (f - mean);
    const double floor = mean + 3.0 * std::sqrt(var / (floors.size() - 1));
    out.push_back({"oracle.two_path_sampling", w <= floor, fmt("w2=%.4g (floor %.4g)", w, floor)});
  }
  return out;
}

std::vector<CheckResult> verify_gradients(const VerifyOptions& options) {
  std::vector<CheckResult> out;
  Rng rng(options.seed, "verify.gradients");
  const NoiseSchedule s = default_schedule();
  const int D = 4;

  const GaussianMixture prior = random_gmm(D, 3, rng);
  const GmmScoreModel model(prior, s);
  const GaussianMixture pr_prior = random_gmm(8, 3, rng);
  const GmmScoreModel pr_model(pr_prior, s);

  const std::vector<NamedOp> linear = {
      {"mask", wrap(options, make_mask_operator(D, {0, 2}))},
      {"downsample", wrap(options, make_downsample_operator(D, 2))},
      {"blur", wrap(options, make_blur_operator(D, gaussian_kernel(3, 1.0)))},
      {"dense", wrap(options, make_dense_operator(random_matrix(3, D, rng)))}};
  const OperatorPtr phase = wrap(options, make_phase_retrieval_operator(8, 2));

  for (const auto& [name, op] : linear) {
    double worst = 0.0, worst_matrix = 0.0;
    const Matrix M = op->matrix();
    for (int p = 0; p < 20; ++p) {
      const Vector x = rng.normal_vector(D);
      const Vector v = rng.normal_vector(op->out_dim());
      const double lhs = op->apply(x).dot(v), rhs = x.dot(op->vjp(x, v));
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
      worst_matrix = std::max(worst_matrix, (M * x - op->apply(x)).cwiseAbs().maxCoeff());
    }
    out.push_back({"gradients.adjoint." + name, worst <= 1e-12, fmt("max err=%.3g (limit %.0e)", worst, 1e-12)});
    out.push_back({"gradients.matrix." + name, worst_matrix <= 1e-12,
                   fmt("max err=%.3g (limit %.0e)", worst_matrix, 1e-12)});
  }

  {
    double worst = 0.0;
    for (int p = 0; p < 20; ++p) {
      const Vector x = rng.normal_vector(8);
      const Vector v = rng.normal_vector(phase->out_dim());
      const double e = fd_gradient_error([&](const Vector& z) { return v.dot(phase->apply(z)); }, x, phase->vjp(x, v));
      worst = std::max(worst, e);
    }
    out.push_back({"gradients.operator_vjp.phase_retrieval", worst <= 1e-5, fmt("max rel err=%.3g (limit %.0e)", worst, 1e-5)});
  }

  auto guidance_check = [&](const std::string& name, const ScoreModel& m, const GaussianMixture& p,
                            OperatorPtr op) {
    double worst = 0.0;
    for (int probe = 0; probe < 20; ++probe) {
      const int t = 1 + static_cast<int>(rng.uniform() * (s.steps() - 1));
      const Vector x0 = sample_gmm(p, 1, rng).front();
      const Vector x = forward_marginal(x0, t, rng.normal_vector(m.dim()), s);
      Rng mr = rng.derive("meas", static_cast<std::uint64_t>(probe));
      const Measurement meas = make_measurement(sample_gmm(p, 1, rng).front(), op, 0.05, mr);
      const Guidance g = guidance_grad(m, meas, x, t);
      const auto f = [&](const Vector& z) { return (meas.y - op->apply(m.x0hat(z, t))).norm(); };
      worst = std::max(worst, fd_gradient_error(f, x, g.grad, 1e-4));
    }
    out.push_back({"gradients.guidance_fd." + name, worst <= 1e-5, fmt("max rel err=%.3g (limit %.0e)", worst, 1e-5)});
  };
  for (const auto& [name, op] : linear) guidance_check(name, model, prior, op);
  guidance_check("phase_retrieval", pr_model, pr_prior, phase);

  {
    double worst_score = 0.0, worst_vjp = 0.0;
    for (int p = 0; p < 100; ++p) {
      const int t = static_cast<int>(rng.uniform() * s.steps());
      const Vector x = forward_marginal(sample_gmm(prior, 1, rng).front(), t, rng.normal_vector(D), s);
      const MixtureDensity& dens = model.density_at(t);
      worst_score = std::max(worst_score, fd_gradient_error([&](const Vector& z) { return dens.log_density(z); },
                                                            x, model.score(x, t)));
      if (t >= 1) {
        const Vector v = rng.normal_vector(D);
        worst_vjp = std::max(worst_vjp, fd_gradient_error([&](const Vector& z) { return v.dot(model.x0hat(z, t)); },
                                                          x, model.x0hat_vjp(x, t, v), 1e-4));
      }
    }
    out.push_back({"gradients.gmm_score_fd", worst_score <= 1e-6, fmt("max rel err=%.3g (limit %.0e)", worst_score, 1e-6)});
    out.push_back({"gradients.gmm_x0hat_vjp_fd", worst_vjp <= 1e-5, fmt("max rel err=%.3g (limit %.0e)", worst_vjp, 1e-5)});
  }

  {
    Rng net_rng = rng.derive("net");
    const DenoiserModel den(DenoiserNet::initialize(3, net_rng), s);
    double worst = 0.0;
    for (int p = 0; p < 50; ++p) {
      const int t = 1 + static_cast<int>(rng.uniform() * (s.steps() - 1));
      const Vector x = rng.normal_vector(3);
      const Vector v = rng.normal_vector(3);
      worst = std::max(worst, fd_gradient_error([&](const Vector& z) { return v.dot(den.x0hat(z, t)); }, x,
                                                den.x0hat_vjp(x, t, v)));
    }
    out.push_back({"gradients.denoiser_vjp_fd", worst <= 1e-4, fmt("max rel err=%.3g (limit %.0e)", worst, 1e-4)});
  }
  return out;
}

std::vector<CheckResult> verify_theory(const VerifyOptions& options) {
  std::vector<CheckResult> out;

  {
    const LangevinBudget b = lemma1_budget(1, 1, 1, 0.5, 1.0);
    const bool ok = b.eta == 0.0078125 && b.K == 89;
    out.push_back({"theory.lemma1_hand", ok, fmt("eta=%.10g K=%.0f (want 0.0078125, 89)", b.eta, static_cast<double>(b.K))});
  }

  {
    // Dyadic/small-integer inputs keep every double product exact, so the
    // formula must agree bit-for-bit with the rational evaluation.
    int cases = 0, bad = 0;
    for (const Rational m : {Rational(1, 2), Rational(1)}) {
      for (const long long L : {1LL, 2LL, 4LL}) {
        for (const long long d : {1LL, 2LL, 3LL}) {
          for (const Rational eps : {Rational(1, 2), Rational(1, 4), Rational(1, 8)}) {
            if (m.value() > static_cast<double>(L)) continue;
            ++cases;
            const Rational eta = m * eps * eps / Rational(32 * L * d * d);
            const Rational coef = Rational(32 * L * L * d) / (m * m * eps * eps);
            const auto b = lemma1_budget(m.value(), static_cast<double>(L), static_cast<int>(d), eps.value(), 1.0);
            const auto K = static_cast<long long>(std::ceil(coef.value() * std::log(1.0 / eps.value())));
            if (b.eta != eta.value() || b.K != K) ++bad;
          }
        }
      }
    }
    out.push_back({"theory.lemma1_rational", bad == 0, fmt("%.0f mismatches over %.0f cases", bad, cases)});
  }

  {
    const auto a = lemma1_budget(1, 2, 2, 0.25, 0.9);
    const auto b = lemma1_budget(1, 2, 2, 0.125, 0.9);
    const auto c = lemma1_budget(1, 1, 1, 0.3, 0.3);
    const bool ok = b.eta == a.eta / 4 && c.K == 0;
    out.push_back({"theory.lemma1_homogeneity_boundary", ok, ok ? "eta(eps/2) = eta/4, K(d0 = eps) = 0" : "mismatch"});
  }

  {
    TheoryParams p;
    p.h = 0.01;
    p.L = 2;
    p.d = 4;
    p.m2 = 3;
    p.eps_score = 0.1;
    p.U_cond = 0.2;
    p.C = 1;
    // 0.05 + 0.02 + 0.1 (2 * 0.2 + 2 * 3 * 0.01) + 0.1 (0.1 + 0.2) = 0.146
    const double v = epsilon_inter(p, 0.05, 0.02);
    out.push_back({"theory.epsilon_inter_hand", std::abs(v - 0.146) <= 1e-14, fmt("value=%.17g (want %.3g)", v, 0.146)});
  }

  struct Target {
    double mean, sd;
  };
  for (const double eps : {0.3, 0.2}) {
    for (const Target tg : {Target{0.0, 1.0}, Target{1.0, 0.5}}) {
      const double prec = 1.0 / (tg.sd * tg.sd);
      const double init_mean = tg.mean + 3.0 * tg.sd;
      const double tv0 = gaussian_tv(init_mean, tg.sd, tg.mean, tg.sd);
      const LangevinBudget b = lemma1_budget(prec, prec, 1, eps, tv0);
      Rng rng(options.seed, "verify.theory", static_cast<std::uint64_t>(eps * 1000 + tg.sd * 10));
      TVCheckOptions o;
      o.n_chains = options.tv_chains;
      const TVCheck c = empirical_tv_check(tg.mean, tg.sd, b, init_mean, tg.sd, rng, o);
      char name[96];
      std::snprintf(name, sizeof name, "theory.tv_sufficiency.eps%.1f.sd%.1f", eps, tg.sd);
      char detail[160];
      std::snprintf(detail, sizeof detail, "tv=%.4f limit=%.4f (eps %.2f + allowance %.4f), K=%lld eta=%.3g",
                    c.tv_estimate, eps + c.allowance, eps, c.allowance, b.K, b.eta);
      out.push_back({name, c.pass, detail});
    }
  }
  return out;
}

std::vector<CheckResult> run_suite(const std::string& suite, const VerifyOptions& options) {
  if (suite == "oracle") return verify_oracle(options);
  if (suite == "gradients") return verify_gradients(options);
  if (suite == "theory") return verify_theory(options);
  if (suite == "all") {
    auto out = verify_oracle(options);
    for (auto* f : {&verify_gradients, &verify_theory}) {
      auto more = f(options);
      out.insert(out.end(), more.begin(), more.end());
    }
    return out;
  }
  throw std::invalid_argument("unknown suite \"" + suite + "\" (oracle, gradients, theory, all)");
}

}  // namespace dpmc
