#include "dpmc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>

#include "dpmc/metrics.hpp"
#include "dpmc/report.hpp"

namespace dpmc {

namespace fs = std::filesystem;

int worker_count(int requested) {
  int n = requested;
  if (n <= 0) {
    n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("DPMC_LAB_THREADS")) {
      const int cap = std::atoi(env);
      if (cap > 0) n = std::min(std::max(n, 1), cap);
    }
  }
  return std::max(n, 1);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::unique_ptr<ScoreModel> build_model(const ExperimentConfig& cfg) {
  NoiseSchedule schedule = build_schedule(cfg.schedule);
  if (cfg.model.kind == "trained") {
    DenoiserNet net = load_net(cfg.model.net);
    if (cfg.prior.kind == "gmm" && net.dim != cfg.prior.gmm.dim()) {
      throw std::runtime_error("trained net dimension does not match the prior");
    }
    return std::make_unique<DenoiserModel>(std::move(net), std::move(schedule));
  }
  if (cfg.prior.kind != "gmm") throw std::runtime_error("analytic model needs a gmm prior");
  return std::make_unique<GmmScoreModel>(cfg.prior.gmm, std::move(schedule));
}

namespace {

struct Moments {
  Vector mean;
  Matrix cov;
};

Moments sample_moments(const std::vector<Vector>& xs) {
  const auto d = xs.front().size();
  Moments m{Vector::Zero(d), Matrix::Zero(d, d)};
  for (const auto& x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (const auto& x : xs) m.cov += (x - m.mean) * (x - m.mean).transpose();
  m.cov /= std::max<double>(1.0, static_cast<double>(xs.size()) - 1.0);
  return m;
}

Moments grid_moments(const GridDensity& g) {
  const int d = g.spec.dims();
  Moments m{Vector::Zero(d), Matrix::Zero(d, d)};
  for (std::size_t c = 0; c < g.mass.size(); ++c) m.mean += g.mass[c] * g.spec.center(static_cast<long long>(c));
  for (std::size_t c = 0; c < g.mass.size(); ++c) {
    const Vector z = g.spec.center(static_cast<long long>(c)) - m.mean;
    m.cov += g.mass[c] * z * z.transpose();
  }
  return m;
}

Vector draw_truth(const ExperimentConfig& cfg, const std::vector<Vector>* dataset, Rng& rng) {
  if (cfg.prior.kind == "gmm") return sample_gmm(cfg.prior.gmm, 1, rng).front();
  const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(dataset->size()));
  return (*dataset)[std::min(i, dataset->size() - 1)];
}

}  // namespace

SeedResult run_seed(const ExperimentConfig& cfg, const ScoreModel& model, std::uint64_t seed,
                    const RunOptions& options) {
  const int dim = model.dim();
  const OperatorPtr op = build_operator(cfg.op, dim);
  const SamplerSpec& sp = cfg.sampler;

  std::vector<Vector> dataset;
  if (cfg.prior.kind == "dataset") dataset = load_dataset(cfg.prior.dataset);

  SeedResult out;
  Rng truth_rng(seed, "x_true");
  out.x_true = draw_truth(cfg, &dataset, truth_rng);
  Rng noise_rng(seed, "noise");
  out.meas = make_measurement(out.x_true, op, cfg.sigma, noise_rng);

  const auto n = static_cast<std::size_t>(cfg.metrics.n_samples);
  out.samples.assign(n, Vector());
  std::vector<long long> nfe(n, 0);
  const auto start = std::chrono::steady_clock::now();
  parallel_for(n, worker_count(options.threads), [&](std::size_t i) {
    Rng chain(seed, "chain", i);
    if (sp.method == "dps") {
      SampleRun run = dps_sample(model, out.meas, sp.dps(), chain);
      nfe[i] = run.nfe;
      out.samples[i] = run.best_sample();
    } else if (sp.method == "dpmc") {
      SampleRun run = dpmc_sample(model, out.meas, sp.dpmc(), chain);
      nfe[i] = run.nfe;
      out.samples[i] = run.best_sample();
    } else {
      const CountingModel counted(model);
      out.samples[i] = unconditional_sample(counted, sp.T, sp.step, chain);
      nfe[i] = counted.count();
    }
  });
  const auto stop = std::chrono::steady_clock::now();

  ResultRow& row = out.row;
  row.seed = seed;
  row.method = sp.method;
  row.task = cfg.task;
  row.T = sp.T;
  if (sp.method == "dpmc") {
    row.K = sp.K;
    row.eta = sp.eta;
    row.xi = sp.xi;
    row.xi_exponent = sp.xi_exponent;
    row.nfe = nfe_of(sp.dpmc());
  } else if (sp.method == "dps") {
    row.xi = sp.zeta;
    row.nfe = nfe_of(sp.dps());
  } else {
    row.nfe = sp.T;
  }
  for (long long v : nfe) {
    if (v != row.nfe) throw std::logic_error("counted NFE differs from the accounting formula");
  }
  if (options.timing) {
    row.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  }

  // Reference distribution: the prior when guidance is off, the conjugate
  // posterior for linear operators, the grid posterior for small nonlinear
  // problems.
  const bool gmm = cfg.prior.kind == "gmm";
  const std::optional<GridSpec>& grid = cfg.metrics.grid;
  const bool grid_ok = grid && grid->dims() == dim;
  std::optional<GaussianMixture> exact;
  std::optional<GridDensity> density;
  if (gmm && sp.unguided()) {
    exact = cfg.prior.gmm;
  } else if (gmm && op->linear()) {
    exact = gmm_posterior(cfg.prior.gmm, op->matrix(), cfg.sigma, out.meas.y);
  } else if (gmm && grid_ok) {
    const MixtureDensity prior(cfg.prior.gmm);
    density = grid_posterior([&](const Vector& x) { return prior.log_density(x); }, *op, cfg.sigma,
                             out.meas.y, *grid);
  }
  if (exact && grid_ok) density = discretize(*exact, *grid);

  Rng oracle_rng(seed, "oracle");
  Moments ref;
  if (exact) {
    out.reference = sample_gmm(*exact, n, oracle_rng);
    ref = {exact->mean(), exact->covariance()};
  } else if (density) {
    out.reference = sample_grid(*density, n, oracle_rng);
    ref = grid_moments(*density);
  }
  out.oracle = !out.reference.empty();

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  if (out.oracle) {
    Rng metric_rng(seed, "metric");
    row.sliced_w2 = sliced_w2(out.samples, out.reference, cfg.metrics.n_proj, metric_rng);
    const Moments got = sample_moments(out.samples);
    row.mean_error = (got.mean - ref.mean).norm();
    row.cov_frobenius_error = (got.cov - ref.cov).norm();
  } else {
    std::cerr << "warning: no oracle for task " << cfg.task << " (dimension " << dim
              << ", nonlinear operator); only residuals reported\n";
    row.sliced_w2 = row.mean_error = row.cov_frobenius_error = nan;
  }
  row.residual_mean = residual_stats(out.samples, out.meas).mean;
  if (density) row.tv_grid = grid_tv(out.samples, *density).tv;
  return out;
}

std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  const auto model = build_model(cfg);
  std::vector<SeedResult> out;
  out.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) out.push_back(run_seed(cfg, *model, seed, options));
  return out;
}

std::vector<ResultRow> run_command(const ExperimentConfig& cfg, const std::string& out_dir,
                                   const RunOptions& options) {
  fs::create_directories(out_dir);
  const auto results = run_experiment(cfg, options);
  std::vector<ResultRow> rows;
  for (const auto& r : results) {
    rows.push_back(r.row);
    if (cfg.metrics.svg) {
      std::ofstream svg(fs::path(out_dir) / (cfg.task + "_seed" + std::to_string(r.row.seed) + ".svg"));
      svg << svg_overlay(r.samples, r.reference,
                         cfg.task + " seed " + std::to_string(r.row.seed) + " (" + r.row.method + ")");
    }
  }
  write_csv(fs::path(out_dir) / "results.csv", rows);
  return rows;
}

ExperimentConfig with_axis(const ExperimentConfig& cfg, const std::string& axis, double value) {
  ExperimentConfig c = cfg;
  auto as_int = [&](const char* what) {
    if (value != std::floor(value) || value < 1 || value > 1e9) {
      throw std::invalid_argument(std::string(what) + " values must be positive integers");
    }
    return static_cast<int>(value);
  };
  if (axis == "K") {
    if (c.sampler.method != "dpmc") throw std::invalid_argument("axis K needs a dpmc sampler");
    c.sampler.K = as_int("K");
  } else if (axis == "T") {
    c.sampler.T = as_int("T");
  } else if (axis == "xi_exponent") {
    if (c.sampler.method != "dpmc") throw std::invalid_argument("axis xi_exponent needs a dpmc sampler");
    c.sampler.xi_exponent = value;
  } else {
    throw std::invalid_argument("axis must be K, T or xi_exponent");
  }
  if (auto problems = validate(c); !problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of nothing");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double mad(const std::vector<double>& v) {
  const double m = median(v);
  std::vector<double> dev;
  dev.reserve(v.size());
  for (double x : v) dev.push_back(std::abs(x - m));
  return median(dev);
}

TrendPoint summarize(double value, const std::vector<double>& metric) {
  return {value, median(metric), mad(metric), metric.size()};
}

bool non_increasing_within_mad(const std::vector<TrendPoint>& trend) {
  for (std::size_t i = 1; i < trend.size(); ++i) {
    if (trend[i].median > trend[i - 1].median + trend[i - 1].mad) return false;
  }
  return true;
}

Ablation run_ablation(const ExperimentConfig& cfg, const std::string& axis,
                      const std::vector<double>& values, const RunOptions& options) {
  if (values.empty()) throw std::invalid_argument("ablate: empty values list");
  std::vector<ExperimentConfig> configs;
  for (double v : values) configs.push_back(with_axis(cfg, axis, v));

  const auto model = build_model(cfg);
  Ablation out;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::vector<double> metric;
    for (std::uint64_t seed : configs[i].seeds) {
      out.rows.push_back(run_seed(configs[i], *model, seed, options).row);
      metric.push_back(out.rows.back().sliced_w2);
    }
    out.trend.push_back(summarize(values[i], metric));
  }
  return out;
}

TrainResult train_command(const ExperimentConfig& cfg, const std::string& out_dir) {
  const TrainSpec spec = cfg.train.value_or(TrainSpec{});
  std::vector<Vector> data;
  if (cfg.prior.kind == "gmm") {
    Rng rng(spec.seed, "dataset");
    data = sample_gmm(cfg.prior.gmm, static_cast<std::size_t>(spec.dataset_size), rng);
  } else {
    data = load_dataset(cfg.prior.dataset);
  }
  TrainConfig tc;
  tc.epochs = spec.epochs;
  tc.batch = spec.batch;
  tc.learning_rate = spec.learning_rate;
  tc.cosine_decay = spec.cosine_decay;
  tc.seed = spec.seed;
  TrainResult result = train_denoiser(data, build_schedule(cfg.schedule), tc);

  fs::create_directories(out_dir);
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : fs::path(out_dir) / path;
  };
  save_net(result.net, resolve(spec.net));
  write_loss_csv(resolve(spec.curve), result.epoch_loss);
  return result;
}

}  // namespace dpmc
