#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dpmc/rng.hpp"

namespace dpmc {

/// Measurement map A: R^D -> R^d with its vector-Jacobian product.
class ForwardOperator {
 public:
  virtual ~ForwardOperator() = default;

  virtual std::string kind() const = 0;
  virtual int in_dim() const = 0;
  virtual int out_dim() const = 0;
  virtual bool linear() const = 0;

  virtual Vector apply(const Vector& x) const = 0;
  /// v^T dA/dx evaluated at x.
  virtual Vector vjp(const Vector& x, const Vector& v) const = 0;
  /// Dense d x D matrix; linear operators only (throws otherwise).
  virtual Matrix matrix() const;
};

using OperatorPtr = std::shared_ptr<const ForwardOperator>;

OperatorPtr make_mask_operator(int dim, std::vector<int> kept);
OperatorPtr make_downsample_operator(int dim, int factor);
/// Circular convolution with a kernel of length <= dim summing to 1; tap j
/// sits at offset j - floor(len/2), so symmetric kernels do not shift.
OperatorPtr make_blur_operator(int dim, Vector kernel);
OperatorPtr make_dense_operator(Matrix matrix);
/// |DFT(zero_pad(x, oversample * dim))|. The VJP differentiates the smoothed
/// magnitude sqrt(re^2 + im^2 + delta^2).
OperatorPtr make_phase_retrieval_operator(int dim, int oversample, double delta = 1e-8);

/// Truncated, normalized Gaussian taps of the given odd-or-even length.
Vector gaussian_kernel(int length, double width);
/// Uniform segment of the given length (1-D motion blur).
Vector motion_kernel(int length);

/// y = A(x) + sigma n, rho = 1 / sigma^2.
struct Measurement {
  Vector y;
  double sigma = 0.05;
  double rho = 400.0;
  OperatorPtr op;
};

Measurement make_measurement(const Vector& x_true, OperatorPtr op, double sigma, Rng& rng);

}  // namespace dpmc
