#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpmc/gmm.hpp"
#include "dpmc/operators.hpp"
#include "dpmc/oracle.hpp"
#include "dpmc/samplers.hpp"

namespace dpmc {

struct PriorSpec {
  std::string kind = "gmm";  // gmm | dataset
  GaussianMixture gmm;
  std::string dataset;       // CSV of D-vectors, one per line (kind = dataset)
};

struct ModelSpec {
  std::string kind = "analytic";  // analytic | trained
  std::string net;                // net file for trained models
};

struct ScheduleSpec {
  int steps = 1000;
  double beta_min = 1e-4;
  double beta_max = 0.02;
};

struct OperatorSpec {
  std::string kind = "mask";  // mask | downsample | blur | dense | phase_retrieval
  std::vector<int> kept;
  int factor = 1;
  std::string kernel = "gaussian";  // gaussian | motion | custom
  int length = 3;
  double width = 1.0;
  std::vector<double> taps;
  std::vector<std::vector<double>> matrix;
  int oversample = 2;
  double delta = 1e-8;
};

struct SamplerSpec {
  std::string method = "dpmc";  // dps | dpmc | unconditional
  int T = 200;
  // dpmc
  int K = 4;
  double eta = 0.4;
  double xi = 1.0;
  double xi_exponent = 3.0;
  Window window;
  int restarts = 1;
  std::optional<double> window_zeta;
  StepKind window_step = StepKind::ddpm;
  // dps
  double zeta = 1.0;
  // unconditional
  StepKind step = StepKind::ddpm;

  DPSConfig dps() const;
  DPMCConfig dpmc() const;
  /// Guidance switched off entirely: the reference becomes the prior.
  bool unguided() const;
};

struct MetricsSpec {
  int n_samples = 1000;
  int n_proj = 128;
  std::optional<GridSpec> grid;
  bool svg = false;
};

struct TrainSpec {
  int dataset_size = 4096;  // prior draws when the prior is a mixture
  int epochs = 200;
  int batch = 128;
  double learning_rate = 0.05;
  bool cosine_decay = false;
  std::uint64_t seed = 0;
  std::string net = "net.bin";
  std::string curve = "training_curve.csv";
};

struct ExperimentConfig {
  std::string task = "task";
  PriorSpec prior;
  ModelSpec model;
  ScheduleSpec schedule;
  OperatorSpec op;
  double sigma = 0.05;
  SamplerSpec sampler;
  MetricsSpec metrics;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "results";
  std::optional<TrainSpec> train;

  int dim() const;
};

/// Carries every problem found in a config, one message per violation.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Parses and validates. Unknown keys, type errors and semantic violations
/// are all collected and thrown together as a ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Semantic checks on an already-typed config; empty when valid.
std::vector<std::string> validate(const ExperimentConfig& cfg);

OperatorPtr build_operator(const OperatorSpec& spec, int dim);
NoiseSchedule build_schedule(const ScheduleSpec& spec);

std::vector<Vector> load_dataset(const std::filesystem::path& path);

}  // namespace dpmc
