#pragma once

#include <filesystem>
#include <vector>

#include "dpmc/score_model.hpp"

namespace dpmc {

/// Epsilon-predicting MLP: [x, emb(t/T)] -> tanh(128) -> tanh(128) -> R^D.
/// The time embedding is sin/cos of (t/T) at frequencies 2^0 .. 2^(E/2-1).
struct DenoiserNet {
  int dim = 0;
  int embed = 16;
  int hidden1 = 128;
  int hidden2 = 128;
  Matrix w1;  // hidden1 x (dim + embed)
  Vector b1;
  Matrix w2;  // hidden2 x hidden1
  Vector b2;
  Matrix w3;  // dim x hidden2
  Vector b3;

  static DenoiserNet initialize(int dim, Rng& rng, int hidden = 128, int embed = 16);
  static DenoiserNet zeros(int dim, int hidden = 128, int embed = 16);

  Vector time_embedding(int t, int steps) const;
  Vector forward(const Vector& x, int t, int steps) const;
  /// v^T d forward / d x (input-gradient only; the embedding is constant in x).
  Vector input_vjp(const Vector& x, int t, int steps, const Vector& v) const;

  bool all_finite() const;
  std::size_t parameter_count() const;
};

Vector denoiser_eps(const DenoiserNet& net, const Vector& x, int t, const NoiseSchedule& s);
/// v^T d x0hat / d x, with x0hat = (x - sqrt(1-ab) eps(x)) / sqrt(ab):
/// the identity path minus the network backward pass, both scaled.
Vector denoiser_x0hat_vjp(const DenoiserNet& net, const Vector& x, int t, const Vector& v,
                          const NoiseSchedule& s);

class DenoiserModel final : public ScoreModel {
 public:
  DenoiserModel(DenoiserNet net, NoiseSchedule schedule);

  int dim() const override { return net_.dim; }
  const NoiseSchedule& schedule() const override { return schedule_; }
  const DenoiserNet& net() const { return net_; }

  Vector eps(const Vector& x, int t) const override;
  Vector x0hat_vjp(const Vector& x, int t, const Vector& v) const override;

 private:
  DenoiserNet net_;
  NoiseSchedule schedule_;
};

struct TrainConfig {
  int epochs = 200;
  int batch = 128;
  double learning_rate = 0.05;
  bool cosine_decay = false;
  std::uint64_t seed = 0;
  int probe_size = 1024;  // fixed (x0, t, eps) draws for the initial/final loss
};

struct TrainResult {
  DenoiserNet net;
  std::vector<double> epoch_loss;  // mean minibatch loss per epoch
  double initial_loss = 0.0;       // probe loss before any update
  double final_loss = 0.0;         // probe loss after training
};

/// Denoising score matching with plain gradient descent. Deterministic given
/// (config.seed, dataset order). Throws std::runtime_error on a non-finite loss.
TrainResult train_denoiser(const std::vector<Vector>& dataset, const NoiseSchedule& s,
                           const TrainConfig& config);

/// Mean of ||eps - net(sqrt(ab) x0 + sqrt(1-ab) eps, t)||^2 over the draws.
double denoising_loss(const DenoiserNet& net, const std::vector<Vector>& x0,
                      const std::vector<int>& t, const std::vector<Vector>& eps,
                      const NoiseSchedule& s);

void save_net(const DenoiserNet& net, const std::filesystem::path& path);
DenoiserNet load_net(const std::filesystem::path& path);

}  // namespace dpmc
