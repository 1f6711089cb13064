#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpmc/config.hpp"
#include "dpmc/denoiser.hpp"

namespace dpmc {

/// One CSV row. For dps rows the xi column carries zeta and K, eta and
/// xi_exponent are 0; unconditional rows carry zeros for all of them.
struct ResultRow {
  std::uint64_t seed = 0;
  std::string method;
  std::string task;
  int T = 0;
  int K = 0;
  double eta = 0.0;
  double xi = 0.0;
  double xi_exponent = 0.0;
  long long nfe = 0;
  double sliced_w2 = 0.0;
  double mean_error = 0.0;
  double cov_frobenius_error = 0.0;
  double residual_mean = 0.0;
  std::optional<double> tv_grid;
  double runtime_ms = 0.0;
};

struct SeedResult {
  ResultRow row;
  Vector x_true;
  Measurement meas;
  std::vector<Vector> samples;    // best candidate of every chain
  std::vector<Vector> reference;  // oracle draws, empty without an oracle
  bool oracle = false;
};

struct RunOptions {
  int threads = 0;      // 0: DPMC_LAB_THREADS or hardware concurrency
  bool timing = false;  // fill runtime_ms (breaks byte-identical output)
};

/// Worker cap: DPMC_LAB_THREADS when set and positive, else the hardware
/// concurrency, never below 1.
int worker_count(int requested = 0);

/// Deterministic parallel loop over [0, n); body(i) must only touch slot i.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

std::unique_ptr<ScoreModel> build_model(const ExperimentConfig& cfg);

/// Streams: x_true from (seed, "x_true"), measurement noise from
/// (seed, "noise"), chain i from (seed, "chain", i), oracle draws from
/// (seed, "oracle"), projections from (seed, "metric").
SeedResult run_seed(const ExperimentConfig& cfg, const ScoreModel& model, std::uint64_t seed,
                    const RunOptions& options = {});

std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// `run`: executes every seed and writes results.csv (and SVGs when asked)
/// under out_dir. Returns the rows.
std::vector<ResultRow> run_command(const ExperimentConfig& cfg, const std::string& out_dir,
                                   const RunOptions& options = {});

struct TrendPoint {
  double value = 0.0;
  double median = 0.0;
  double mad = 0.0;
  std::size_t n = 0;
};

/// Copy of cfg with one sampler axis (K, T or xi_exponent) set to value.
ExperimentConfig with_axis(const ExperimentConfig& cfg, const std::string& axis, double value);

struct Ablation {
  std::vector<ResultRow> rows;
  std::vector<TrendPoint> trend;  // median sliced_w2 per value
};

Ablation run_ablation(const ExperimentConfig& cfg, const std::string& axis,
                      const std::vector<double>& values, const RunOptions& options = {});

double median(std::vector<double> v);
/// Median absolute deviation about the median (unscaled).
double mad(const std::vector<double>& v);
TrendPoint summarize(double value, const std::vector<double>& metric);
/// Each median is at most the previous median plus the previous MAD.
bool non_increasing_within_mad(const std::vector<TrendPoint>& trend);

/// `train`: fits a denoiser on prior draws (or the dataset file), writes the
/// net and a per-epoch loss CSV under out_dir.
TrainResult train_command(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace dpmc
