#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dpmc/operators.hpp"

namespace dpmc {

struct CheckResult {
  std::string name;  // suite.check[.variant]
  bool pass = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 20240501;
  /// Applied to every operator the suites build; tests use it to inject
  /// faults (e.g. a corrupted adjoint).
  std::function<OperatorPtr(OperatorPtr)> wrap_operator;
  int tv_chains = 100000;
};

/// Exact posterior vs brute-force grid on five 2-D linear tasks, the scalar
/// conjugate case, t = 0 composition, log-shift invariance, two-path sampling.
std::vector<CheckResult> verify_oracle(const VerifyOptions& options = {});

/// Adjoint identities, finite-difference audits of scores, Tweedie VJPs
/// (analytic and denoiser) and guidance gradients for all operator kinds.
std::vector<CheckResult> verify_gradients(const VerifyOptions& options = {});

/// lemma1_budget arithmetic (exact rationals), eps_inter hand instance and the
/// empirical TV sufficiency grid.
std::vector<CheckResult> verify_theory(const VerifyOptions& options = {});

/// suite: oracle | gradients | theory | all. Throws on an unknown name.
std::vector<CheckResult> run_suite(const std::string& suite, const VerifyOptions& options = {});

/// Largest relative error ||fd - g|| / max(||g||, floor) of central
/// differences of f against the analytic gradient g, at the given point.
double fd_gradient_error(const std::function<double(const Vector&)>& f, const Vector& x,
                         const Vector& g, double h = 1e-5);

}  // namespace dpmc
