#include "dpmc/samplers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dpmc {

void DPSConfig::validate() const {
  if (T < 1) throw std::invalid_argument("dps: T must be >= 1");
  if (!(zeta >= 0.0) || !std::isfinite(zeta)) throw std::invalid_argument("dps: zeta must be >= 0");
}

void DPMCConfig::validate() const {
  if (T < 1) throw std::invalid_argument("dpmc: T must be >= 1");
  if (K < 1) throw std::invalid_argument("dpmc: K must be >= 1");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("dpmc: eta must be >= 0");
  if (!(xi >= 0.0) || !std::isfinite(xi)) throw std::invalid_argument("dpmc: xi must be >= 0");
  if (!std::isfinite(xi_exponent)) throw std::invalid_argument("dpmc: xi_exponent must be finite");
  if (restarts < 1) throw std::invalid_argument("dpmc: restarts must be >= 1");
  if (window.head < 0.0 || window.explore < 0.0 || window.tail < 0.0 ||
      std::abs(window.head + window.explore + window.tail - 1.0) > 1e-9) {
    throw std::invalid_argument("dpmc: window fractions must be nonnegative and sum to 1");
  }
  if (window_zeta && !(*window_zeta >= 0.0)) {
    throw std::invalid_argument("dpmc: window_zeta must be >= 0");
  }
}

WindowCounts window_counts(int T, const Window& w) {
  // The 1e-9 nudge keeps e.g. 0.1 * 200 = 20.000000000000004 and
  // 0.3 * 10 = 2.9999999999999996 on the intended integer.
  WindowCounts c;
  c.head = static_cast<int>(std::floor(w.head * T + 1e-9));
  c.tail = static_cast<int>(std::floor(w.tail * T + 1e-9));
  c.middle = T - c.head - c.tail;
  if (c.middle < 0) throw std::invalid_argument("window_counts: fractions exceed 1");
  return c;
}

long long nfe_of(const DPSConfig& cfg) {
  cfg.validate();
  return cfg.T;
}

long long nfe_of(const DPMCConfig& cfg) {
  cfg.validate();
  const WindowCounts c = window_counts(cfg.T, cfg.window);
  return static_cast<long long>(c.head) + c.tail + static_cast<long long>(c.middle) * (1 + cfg.K);
}

Guidance guidance_from_residual(const ScoreModel& model, const Measurement& meas, const Vector& x,
                                int t, const Vector& x0hat, const Vector& residual) {
  Guidance g{Vector::Zero(x.size()), residual.norm()};
  if (g.residual_norm < 1e-12) return g;
  // d||y - A(u)||/du = -A'(u)^T r / ||r||, then pull back through x0hat.
  const Vector pulled = meas.op->vjp(x0hat, residual);
  g.grad = -model.x0hat_vjp(x, t, pulled) / g.residual_norm;
  return g;
}

Guidance guidance_grad(const ScoreModel& model, const Measurement& meas, const Vector& x, int t) {
  if (t < 1) throw std::invalid_argument("guidance_grad: t must be >= 1");
  const Vector x0 = model.x0hat(x, t);
  return guidance_from_residual(model, meas, x, t, x0, meas.y - meas.op->apply(x0));
}

namespace {

struct Evaluation {
  Vector score;
  Vector eps;
  Vector x0hat;
};

// One model evaluation at (x, t); eps and x0hat follow from the score.
Evaluation evaluate(const ScoreModel& model, const Vector& x, int t) {
  const NoiseSchedule& s = model.schedule();
  const double ab = s.bar_alpha(t);
  Evaluation e;
  e.score = model.score(x, t);
  e.eps = eps_from_score(e.score, t, s);
  e.x0hat = (x + (1.0 - ab) * e.score) / std::sqrt(ab);
  return e;
}

Guidance guidance_at(const ScoreModel& model, const Measurement& meas, const Vector& x, int t,
                     const Evaluation& e, bool need_grad) {
  const Vector r = meas.y - meas.op->apply(e.x0hat);
  if (!need_grad) return Guidance{Vector::Zero(x.size()), r.norm()};
  return guidance_from_residual(model, meas, x, t, e.x0hat, r);
}

void check_finite(const Vector& x, const char* where, int dense_t, int iteration) {
  if (!x.allFinite()) {
    throw std::runtime_error(std::string(where) + ": non-finite state at level t=" +
                             std::to_string(dense_t) + ", iteration " + std::to_string(iteration));
  }
}

void check_problem(const ScoreModel& model, const Measurement& meas, int T) {
  if (!meas.op) throw std::invalid_argument("sampler: measurement has no operator");
  if (meas.op->in_dim() != model.dim()) {
    throw std::invalid_argument("sampler: operator input dimension does not match the model");
  }
  if (meas.y.size() != meas.op->out_dim()) {
    throw std::invalid_argument("sampler: measurement dimension does not match the operator");
  }
  if (T > model.schedule().steps()) {
    throw std::invalid_argument("sampler: T exceeds the model schedule length");
  }
}

double xi_at(double xi, double exponent, double bar_alpha) {
  return xi == 0.0 ? 0.0 : xi * std::pow(bar_alpha, exponent);
}

// x_t (coarse level i) -> x_{t-1}: unconditional step minus step_size * grad.
Vector guided_ancestral_step(const ScoreModel& model, const Measurement& meas, const TimeGrid& grid,
                             const Vector& x, int level, StepKind kind, double step_size,
                             Rng& rng, LevelTrace& trace) {
  const int t = grid.dense_index(level);
  const Evaluation e = evaluate(model, x, t);
  const Guidance g = guidance_at(model, meas, x, t, e, step_size > 0.0);
  const Vector z = rng.normal_vector(x.size());
  Vector next = kind == StepKind::ddpm ? ddpm_step(x, e.eps, level, z, grid.coarse())
                                       : ddim_step(x, e.eps, level, level - 1, 0.0, z, grid.coarse());
  trace.dense_t = t;
  trace.residual = g.residual_norm;
  if (step_size > 0.0) {
    next -= step_size * g.grad;
    trace.guidance_norm = step_size * g.grad.norm();
  }
  return next;
}

Vector langevin_impl(const ScoreModel& model, const Measurement& meas, Vector x, int t, int K,
                     double eta_t, double xi_t, Rng& rng) {
  const double noise = std::sqrt(2.0 * eta_t);
  for (int k = 0; k < K; ++k) {
    const Evaluation e = evaluate(model, x, t);
    Vector drift = e.score;
    if (xi_t > 0.0) drift -= xi_t * guidance_at(model, meas, x, t, e, true).grad;
    x += eta_t * drift + noise * rng.normal_vector(x.size());
    check_finite(x, "langevin_explore", t, k);
  }
  return x;
}

}  // namespace

Vector guided_score(const ScoreModel& model, const Measurement& meas, const Vector& x, int t,
                    double xi_t) {
  if (!(xi_t >= 0.0)) throw std::invalid_argument("guided_score: xi_t must be >= 0");
  const Evaluation e = evaluate(model, x, t);
  if (xi_t == 0.0) return e.score;
  return e.score - xi_t * guidance_at(model, meas, x, t, e, true).grad;
}

Vector langevin_explore(const ScoreModel& model, const Measurement& meas, Vector x, int t, int K,
                        double eta_t, double xi_t, Rng& rng) {
  if (K < 1) throw std::invalid_argument("langevin_explore: K must be >= 1");
  if (!(eta_t >= 0.0) || !(xi_t >= 0.0)) {
    throw std::invalid_argument("langevin_explore: eta_t and xi_t must be >= 0");
  }
  return langevin_impl(model, meas, std::move(x), t, K, eta_t, xi_t, rng);
}

SampleRun dps_sample(const ScoreModel& model, const Measurement& meas, const DPSConfig& cfg,
                     Rng& rng) {
  cfg.validate();
  check_problem(model, meas, cfg.T);
  const TimeGrid grid(model.schedule(), cfg.T);
  const CountingModel counted(model);

  SampleRun run;
  run.traces.emplace_back();
  auto& trace = run.traces.back();
  Vector x = rng.normal_vector(model.dim());
  for (int level = cfg.T; level >= 1; --level) {
    LevelTrace lt;
    x = guided_ancestral_step(counted, meas, grid, x, level, StepKind::ddpm, cfg.zeta, rng, lt);
    check_finite(x, "dps_sample", lt.dense_t, 0);
    trace.push_back(lt);
  }
  run.nfe = counted.count();
  run.residuals.push_back((meas.y - meas.op->apply(x)).norm());
  run.candidates.push_back(std::move(x));
  return run;
}

SampleRun dpmc_sample(const ScoreModel& model, const Measurement& meas, const DPMCConfig& cfg,
                      Rng& rng) {
  cfg.validate();
  check_problem(model, meas, cfg.T);
  const TimeGrid grid(model.schedule(), cfg.T);
  const NoiseSchedule& dense = model.schedule();
  const WindowCounts counts = window_counts(cfg.T, cfg.window);

  SampleRun run;
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng chain = rng.derive("restart", static_cast<std::uint64_t>(r));
    const CountingModel counted(model);
    std::vector<LevelTrace> trace;
    trace.reserve(static_cast<std::size_t>(cfg.T));

    Vector x = chain.normal_vector(model.dim());
    for (int level = cfg.T; level >= 1; --level) {
      const int step = cfg.T - level;
      const bool explore = step >= counts.head && step < counts.head + counts.middle;
      LevelTrace lt;
      if (!explore) {
        const int t = grid.dense_index(level);
        const double zeta = cfg.window_zeta
                                ? *cfg.window_zeta
                                : xi_at(cfg.xi, cfg.xi_exponent, dense.bar_alpha(t)) *
                                      grid.coarse().beta(level) /
                                      std::sqrt(grid.coarse().alpha(level));
        x = guided_ancestral_step(counted, meas, grid, x, level, cfg.window_step, zeta, chain, lt);
        check_finite(x, "dpmc_sample", lt.dense_t, 0);
      } else {
        // Proposal: deterministic DDIM jump, no guidance.
        const int t = grid.dense_index(level);
        const int t_prev = grid.dense_index(level - 1);
        const Evaluation e = evaluate(counted, x, t);
        lt.dense_t = t;
        lt.residual = (meas.y - meas.op->apply(e.x0hat)).norm();
        x = ddim_step(x, e.eps, t, t_prev, 0.0, x, dense);
        check_finite(x, "dpmc_sample", t, 0);
        // Exploration on the tilted target at the new level.
        const double eta_t = cfg.eta * dense.beta(std::max(t_prev, 1));
        const double xi_t = xi_at(cfg.xi, cfg.xi_exponent, dense.bar_alpha(t_prev));
        const Vector before = x;
        x = langevin_impl(counted, meas, std::move(x), t_prev, cfg.K, eta_t, xi_t, chain);
        lt.guidance_norm = (x - before).norm();
      }
      trace.push_back(lt);
    }
    run.nfe = counted.count();
    run.residuals.push_back((meas.y - meas.op->apply(x)).norm());
    run.candidates.push_back(std::move(x));
    run.traces.push_back(std::move(trace));
  }
  for (int r = 1; r < cfg.restarts; ++r) {
    if (run.residuals[static_cast<std::size_t>(r)] < run.residuals[static_cast<std::size_t>(run.best)]) {
      run.best = r;
    }
  }
  return run;
}

Vector unconditional_sample(const ScoreModel& model, int T, StepKind kind, Rng& rng) {
  if (T < 1 || T > model.schedule().steps()) {
    throw std::invalid_argument("unconditional_sample: T out of range");
  }
  const TimeGrid grid(model.schedule(), T);
  Vector x = rng.normal_vector(model.dim());
  for (int level = T; level >= 1; --level) {
    const int t = grid.dense_index(level);
    const Vector eps = model.eps(x, t);
    if (kind == StepKind::ddpm) {
      x = ddpm_step(x, eps, level, rng.normal_vector(x.size()), grid.coarse());
    } else {
      x = ddim_step(x, eps, level, level - 1, 0.0, x, grid.coarse());
    }
    check_finite(x, "unconditional_sample", t, 0);
  }
  return x;
}

}  // namespace dpmc
