#pragma once

#include <optional>
#include <vector>

#include "dpmc/operators.hpp"
#include "dpmc/score_model.hpp"

namespace dpmc {

struct DPSConfig {
  int T = 1000;
  double zeta = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Split of the T noise levels: guided ancestral steps on the first `head`
/// fraction, proposal + Langevin exploration on `explore`, guided ancestral
/// steps on the final `tail`.
struct Window {
  double head = 0.30;
  double explore = 0.60;
  double tail = 0.10;
};

enum class StepKind { ddpm, ddim };

struct DPMCConfig {
  int T = 200;
  int K = 4;
  double eta = 0.4;
  double xi = 1.0;
  double xi_exponent = 3.0;
  Window window;
  int restarts = 1;
  /// Constant guidance step for head/tail steps. When unset, those steps use
  /// the tilted score, i.e. a guidance step of xi_t * beta_i / sqrt(alpha_i).
  std::optional<double> window_zeta;
  StepKind window_step = StepKind::ddpm;
  std::uint64_t seed = 0;

  void validate() const;
};

struct WindowCounts {
  int head = 0;
  int middle = 0;
  int tail = 0;
};

/// head = floor(f_head T), tail = floor(f_tail T), middle = the rest.
WindowCounts window_counts(int T, const Window& w);

long long nfe_of(const DPSConfig& cfg);
/// Per candidate: head + tail + middle * (1 + K).
long long nfe_of(const DPMCConfig& cfg);

struct LevelTrace {
  int dense_t = 0;
  double guidance_norm = 0.0;  // norm of the guidance displacement applied
  double residual = 0.0;       // ||y - A(x0hat)|| at the level's first evaluation
};

struct SampleRun {
  std::vector<Vector> candidates;
  std::vector<double> residuals;  // ||y - A(x)|| per candidate
  int best = 0;                   // argmin residual
  long long nfe = 0;              // per candidate
  std::vector<std::vector<LevelTrace>> traces;

  const Vector& best_sample() const { return candidates.at(static_cast<std::size_t>(best)); }
};

struct Guidance {
  Vector grad;  // d ||y - A(x0hat(x))|| / dx
  double residual_norm = 0.0;
};

/// Gradient of the plain (non-squared) residual norm, through the Tweedie
/// mean. Zero gradient when the residual norm is below 1e-12.
Guidance guidance_grad(const ScoreModel& model, const Measurement& meas, const Vector& x, int t);

/// Chain rule given x0hat and a residual r: -x0hat_vjp(A.vjp(x0hat, r)) / ||r||.
/// Exposed so the normalization can be exercised with injected residuals.
Guidance guidance_from_residual(const ScoreModel& model, const Measurement& meas, const Vector& x,
                                int t, const Vector& x0hat, const Vector& residual);

/// score(x, t) - xi_t * guidance_grad(x, t).
Vector guided_score(const ScoreModel& model, const Measurement& meas, const Vector& x, int t,
                    double xi_t);

/// K unadjusted Langevin steps on the tilted target at level t.
Vector langevin_explore(const ScoreModel& model, const Measurement& meas, Vector x, int t, int K,
                        double eta_t, double xi_t, Rng& rng);

SampleRun dps_sample(const ScoreModel& model, const Measurement& meas, const DPSConfig& cfg,
                     Rng& rng);

SampleRun dpmc_sample(const ScoreModel& model, const Measurement& meas, const DPMCConfig& cfg,
                      Rng& rng);

Vector unconditional_sample(const ScoreModel& model, int T, StepKind kind, Rng& rng);

}  // namespace dpmc
