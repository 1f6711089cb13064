// Acceptance gate: one PASS/FAIL line per criterion. Optional arguments pick
// a subset, e.g. `acceptance 1 7 10`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "dpmc/config.hpp"
#include "dpmc/experiment.hpp"
#include "dpmc/metrics.hpp"
#include "dpmc/oracle.hpp"
#include "dpmc/samplers.hpp"
#include "dpmc/verify.hpp"

using namespace dpmc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string printf_str(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string printf_str(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

ExperimentConfig bundled(const std::string& name) {
  return load_config(fs::path(DPMC_CONFIG_DIR) / (name + ".json"));
}

std::string failing(const std::vector<CheckResult>& checks, const std::function<bool(const CheckResult&)>& pick,
                    int& n, bool& all) {
  std::string names;
  n = 0;
  all = true;
  for (const auto& c : checks) {
    if (!pick(c)) continue;
    ++n;
    if (!c.pass) {
      all = false;
      names += " " + c.name + " (" + c.detail + ")";
    }
  }
  return names;
}

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

Outcome oracle_cross_validation() {
  const auto checks = verify_oracle();
  double worst = 0.0;
  int n = 0;
  bool all = true;
  const auto bad = failing(checks, [](const CheckResult& c) { return starts_with(c.name, "oracle.posterior_vs_grid."); }, n, all);
  for (const auto& c : checks) {
    if (starts_with(c.name, "oracle.posterior_vs_grid.")) worst = std::max(worst, std::stod(c.detail.substr(3)));
  }
  return {all && n == 5, printf_str("%d tasks, max TV %.3g (limit 1e-3)%s", n, worst, bad.c_str())};
}

Outcome gradient_audit() {
  const auto checks = verify_gradients();
  int n = 0;
  bool all = true;
  const auto bad = failing(checks, [](const CheckResult& c) {
    return starts_with(c.name, "gradients.guidance_fd.") || c.name == "gradients.denoiser_vjp_fd";
  }, n, all);
  std::string worst;
  for (const auto& c : checks) {
    if (starts_with(c.name, "gradients.guidance_fd.") || c.name == "gradients.denoiser_vjp_fd") {
      worst += " " + c.name.substr(c.name.rfind('.') + 1) + "=" + c.detail.substr(c.detail.find('=') + 1, 8);
    }
  }
  return {all && n == 6, printf_str("%d checks, 20+ probes each;%s%s", n, worst.c_str(), bad.c_str())};
}

Outcome langevin_kernel_law() {
  const double mu = 0.5, s2 = 0.8;
  const GmmScoreModel model(single_gaussian(Vector::Constant(1, mu), Matrix::Constant(1, 1, s2)), default_schedule());
  Measurement meas;
  meas.op = make_mask_operator(1, {0});
  meas.y = Vector::Zero(1);
  const std::size_t n = 100000;
  bool ok = true;
  std::string detail;
  for (const auto& [ratio, K] : {std::pair{0.01, 500}, std::pair{0.1, 100}}) {
    const double eta = ratio * s2;
    std::vector<double> end(n);
    parallel_for(n, worker_count(), [&](std::size_t i) {
      Rng rng(20240501, "ula", i);
      Vector x = Vector::Constant(1, mu + std::sqrt(s2) * rng.normal());
      end[i] = langevin_explore(model, meas, x, 0, K, eta, 0.0, rng)[0];
    });
    double mean = 0.0;
    for (double v : end) mean += v / n;
    double var = 0.0;
    for (double v : end) var += (v - mean) * (v - mean) / (n - 1);
    const double expect = s2 / (1.0 - eta / (2.0 * s2));
    const double se = expect * std::sqrt(2.0 / (n - 1));
    const double z = (var - expect) / se;
    ok = ok && std::abs(z) <= 4.0;
    detail += printf_str(" eta/s2=%g: var %.5f vs %.5f (z=%+.2f)", ratio, var, expect, z);
  }
  return {ok, "1e5 chains;" + detail + " (limit 4 SE)"};
}

// Oracle-vs-oracle floor on the same projections as the sampler distance.
struct Recovery {
  double w2 = 0.0;
  double floor = 0.0;
};

Recovery recovery(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto model = build_model(cfg);
  const SeedResult r = run_seed(cfg, *model, seed);
  const auto post = gmm_posterior(cfg.prior.gmm, r.meas.op->matrix(), cfg.sigma, r.meas.y);
  Rng extra(seed, "oracle_floor");
  const auto second = sample_gmm(post, r.reference.size(), extra);
  Rng mr(seed, "metric");
  const auto dirs = random_directions(cfg.dim(), cfg.metrics.n_proj, mr);
  return {sliced_w2(r.samples, r.reference, dirs, mr), sliced_w2(second, r.reference, dirs, mr)};
}

Outcome posterior_recovery() {
  const ExperimentConfig cfg = bundled("gmm2d_inpaint_dpmc");
  const std::uint64_t seed = cfg.seeds.front();
  const Recovery r = recovery(cfg, seed);
  return {r.w2 <= 2.0 * r.floor,
          printf_str("T=%d K=%d eta=%g xi=%g p=%g, n=%d, seed %llu: sliced W2 %.4f vs 2 x floor %.4f",
                     cfg.sampler.T, cfg.sampler.K, cfg.sampler.eta, cfg.sampler.xi, cfg.sampler.xi_exponent,
                     cfg.metrics.n_samples, static_cast<unsigned long long>(seed), r.w2, 2.0 * r.floor)};
}

Outcome dpmc_beats_dps() {
  ExperimentConfig dpmc_cfg = bundled("gmm2d_inpaint_dpmc");
  dpmc_cfg.sampler.T = 200;
  ExperimentConfig dps_cfg = bundled("gmm2d_inpaint_dps");
  dpmc_cfg.seeds.clear();
  for (std::uint64_t s = 1; s <= 20; ++s) dpmc_cfg.seeds.push_back(s);
  dps_cfg.seeds = dpmc_cfg.seeds;
  const auto a = run_experiment(dpmc_cfg);
  const auto b = run_experiment(dps_cfg);
  std::vector<double> wa, wb;
  int wins = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    wa.push_back(a[i].row.sliced_w2);
    wb.push_back(b[i].row.sliced_w2);
    wins += wa.back() < wb.back() ? 1 : 0;
  }
  const double ma = median(wa), mb = median(wb);
  return {ma < mb && wins >= 15,
          printf_str("DPMC nfe=%lld median %.4f, DPS nfe=%lld median %.4f, DPMC wins %d/20 (need 15)",
                     a.front().row.nfe, ma, b.front().row.nfe, mb, wins)};
}

std::string trend_text(const std::vector<TrendPoint>& t) {
  std::string s;
  for (const auto& p : t) s += printf_str(" %g:%.4f+-%.4f", p.value, p.median, p.mad);
  return s;
}

Outcome ablation_trends() {
  ExperimentConfig cfg = bundled("gmm2d_inpaint_dpmc");
  cfg.metrics.n_samples = 800;
  cfg.metrics.grid.reset();
  cfg.seeds = {1, 2, 3, 4, 5};
  const auto k = run_ablation(cfg, "K", {1, 2, 4, 6});
  const auto t = run_ablation(cfg, "T", {50, 100, 200});
  const bool ok = non_increasing_within_mad(k.trend) && non_increasing_within_mad(t.trend);
  return {ok, printf_str("5 seeds x 800 samples; K (T=%d):%s | T (K=%d):%s", cfg.sampler.T, trend_text(k.trend).c_str(),
                         cfg.sampler.K, trend_text(t.trend).c_str())};
}

Outcome nfe_accounting() {
  DPMCConfig c;
  c.T = 200;
  c.K = 4;
  const long long a = nfe_of(c);
  c.K = 6;
  const long long b = nfe_of(c);
  return {a == 680 && b == 920, printf_str("T=200 K=4: %lld (want 680), K=6: %lld (want 920)", a, b)};
}

Outcome phase_retrieval() {
  const ExperimentConfig cfg = bundled("phase_retrieval16_dpmc");
  const auto model = build_model(cfg);
  const double limit = 3.0 * cfg.sigma * std::sqrt(2.0 * cfg.dim());
  int good = 0;
  std::string detail;
  for (std::uint64_t seed : cfg.seeds) {
    const SeedResult r = run_seed(cfg, *model, seed);
    const Vector& x = r.samples.front();
    const Vector rx = x.reverse();
    const Vector& t = r.x_true;
    const double err = std::min({(x - t).norm(), (x + t).norm(), (rx - t).norm(), (rx + t).norm()});
    const double res = (r.meas.y - r.meas.op->apply(x)).norm();
    const bool ok = res <= limit && err <= 0.15 * t.norm();
    good += ok ? 1 : 0;
    detail += printf_str(" %llu:%s(res %.3f, err %.3f/%.3f)", static_cast<unsigned long long>(seed), ok ? "ok" : "miss",
                         res, err, 0.15 * t.norm());
  }
  return {good >= 4, printf_str("%d/%zu seeds recovered (need 4), residual limit %.3f;", good, cfg.seeds.size(), limit) +
                         detail};
}

Outcome theory_suite() {
  const auto checks = verify_theory();
  int n = 0;
  bool all = true;
  const auto bad = failing(checks, [](const CheckResult&) { return true; }, n, all);
  return {all, printf_str("%d checks;", n) + (all ? std::string(" all pass") : " failing:" + bad)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const ExperimentConfig cfg = bundled("gmm2d_inpaint_dpmc");
  const fs::path root = fs::temp_directory_path() / "dpmc_acceptance_determinism";
  fs::remove_all(root);
  run_command(cfg, (root / "first").string());
  run_command(cfg, (root / "second").string());
  const std::string a = slurp(root / "first" / "results.csv");
  const std::string b = slurp(root / "second" / "results.csv");
  fs::remove_all(root);
  return {!a.empty() && a == b, printf_str("%zu-byte results.csv, %s", a.size(), a == b ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no runtime limit
    Outcome (*run)();
  };
  const Criterion all[] = {
      {1, "oracle cross-validation", 30, oracle_cross_validation},
      {2, "gradient audit", 60, gradient_audit},
      {3, "Langevin kernel law", 0, langevin_kernel_law},
      {4, "posterior recovery", 300, posterior_recovery},
      {5, "DPMC beats DPS at lower budget", 0, dpmc_beats_dps},
      {6, "ablation trends", 1200, ablation_trends},
      {7, "NFE accounting", 0, nfe_accounting},
      {8, "phase retrieval", 0, phase_retrieval},
      {9, "theory suite", 600, theory_suite},
      {10, "determinism", 0, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs > c.limit_s) {
      o.pass = false;
      o.detail += printf_str("; runtime %.1f s exceeds %.0f s", secs, c.limit_s);
    }
    std::printf("criterion %2d %s  %s: %s [%.1f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
