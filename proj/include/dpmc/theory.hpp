#pragma once

#include "dpmc/rng.hpp"

namespace dpmc {

/// Step size and iteration count for unadjusted Langevin on an m-strongly
/// log-concave, L-smooth target in d dimensions to reach TV <= eps from an
/// initial TV of d_tv0:
///   eta = m eps^2 / (32 L d^2),  K = ceil(32 L^2 d log(d_tv0 / eps) / (m^2 eps^2)).
struct LangevinBudget {
  double m = 1.0;
  double L = 1.0;
  int d = 1;
  double eps = 0.1;
  double d_tv0 = 1.0;
  double eta = 0.0;
  long long K = 0;
};

LangevinBudget lemma1_budget(double m, double L, int d, double eps, double d_tv0);

struct TheoryParams {
  double h = 0.01;          // time step T / N; must lie in (0, min(1/L, 1))
  double T_horizon = 1.0;
  double eps_score = 0.0;   // unconditional score error
  double eps_cond = 0.0;    // TV between DPS-type and true conditionals
  double U_cond = 0.0;      // second-moment bound of the likelihood score
  double m2 = 0.0;          // second moment of p_0(. | y)
  double C = 1.0;           // universal constant
  double L = 1.0;
  int d = 1;

  void validate() const;
};

/// eps + eps_cond + C sqrt(h) (L sqrt(d h) + L m2 h) + C sqrt(h) (eps_score + U_cond).
double epsilon_inter(const TheoryParams& params, double eps, double eps_cond);

/// Inner-loop budget of the annealed scheme: the lemma1_budget step size with K
/// taken at the larger of initial_tv / eps and eps_inter / eps. initial_tv
/// stands in for sqrt(poly(d) exp(-T)) + eps_cond, which has no closed form.
LangevinBudget annealed_budget(const TheoryParams& params, double m, double eps,
                               double initial_tv);

struct TVCheck {
  double tv_estimate = 0.0;
  double allowance = 0.0;  // histogram noise allowance added to eps
  double initial_tv = 0.0; // exact TV between the init and target Gaussians
  bool pass = false;
};

struct TVCheckOptions {
  int n_chains = 100000;
  int bins = 60;             // over target mean +- 6 std, plus an overflow cell
  double noise_z = 3.0;      // per-bin binomial standard errors in the allowance
};

/// Runs n_chains independent ULA chains on N(target_mean, target_std^2) for
/// budget.K steps of size budget.eta from N(init_mean, init_std^2), then
/// compares the histogram of terminal states with exact bin probabilities.
/// Passes when tv_estimate <= budget.eps + allowance.
TVCheck empirical_tv_check(double target_mean, double target_std, const LangevinBudget& budget,
                           double init_mean, double init_std, Rng& rng,
                           const TVCheckOptions& options = {});

/// Exact TV between two 1-D Gaussians (by quadrature on a fine grid).
double gaussian_tv(double mean_a, double std_a, double mean_b, double std_b);

}  // namespace dpmc
