#include "dpmc/operators.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace dpmc {

Matrix ForwardOperator::matrix() const {
  if (!linear()) throw std::logic_error(kind() + ": matrix() requires a linear operator");
  Matrix m(out_dim(), in_dim());
  for (int j = 0; j < in_dim(); ++j) m.col(j) = apply(Vector::Unit(in_dim(), j));
  return m;
}

namespace {

void check_input(const ForwardOperator& op, const Vector& x) {
  if (x.size() != op.in_dim()) {
    throw std::invalid_argument(op.kind() + ": expected input of dimension " +
                                std::to_string(op.in_dim()) + ", got " +
                                std::to_string(x.size()));
  }
}

void check_output(const ForwardOperator& op, const Vector& v) {
  if (v.size() != op.out_dim()) {
    throw std::invalid_argument(op.kind() + ": expected cotangent of dimension " +
                                std::to_string(op.out_dim()) + ", got " +
                                std::to_string(v.size()));
  }
}

class MaskOperator final : public ForwardOperator {
 public:
  MaskOperator(int dim, std::vector<int> kept) : dim_(dim), kept_(std::move(kept)) {
    if (dim < 1) throw std::invalid_argument("mask: dimension must be >= 1");
    std::set<int> seen;
    for (int i : kept_) {
      if (i < 0 || i >= dim) throw std::invalid_argument("mask: index out of range");
      if (!seen.insert(i).second) throw std::invalid_argument("mask: duplicate index");
    }
  }
  std::string kind() const override { return "mask"; }
  int in_dim() const override { return dim_; }
  int out_dim() const override { return static_cast<int>(kept_.size()); }
  bool linear() const override { return true; }
  Vector apply(const Vector& x) const override {
    check_input(*this, x);
    Vector y(out_dim());
    for (int i = 0; i < out_dim(); ++i) y[i] = x[kept_[static_cast<std::size_t>(i)]];
    return y;
  }
  Vector vjp(const Vector&, const Vector& v) const override {
    check_output(*this, v);
    Vector g = Vector::Zero(dim_);
    for (int i = 0; i < out_dim(); ++i) g[kept_[static_cast<std::size_t>(i)]] = v[i];
    return g;
  }

 private:
  int dim_;
  std::vector<int> kept_;
};

class DownsampleOperator final : public ForwardOperator {
 public:
  DownsampleOperator(int dim, int factor) : dim_(dim), factor_(factor) {
    if (dim < 1 || factor < 1 || dim % factor != 0) {
      throw std::invalid_argument("downsample: factor must divide the dimension");
    }
  }
  std::string kind() const override { return "downsample"; }
  int in_dim() const override { return dim_; }
  int out_dim() const override { return dim_ / factor_; }
  bool linear() const override { return true; }
  Vector apply(const Vector& x) const override {
    check_input(*this, x);
    Vector y(out_dim());
    for (int i = 0; i < out_dim(); ++i) y[i] = x.segment(i * factor_, factor_).mean();
    return y;
  }
  Vector vjp(const Vector&, const Vector& v) const override {
    check_output(*this, v);
    Vector g(dim_);
    for (int i = 0; i < out_dim(); ++i) g.segment(i * factor_, factor_).setConstant(v[i] / factor_);
    return g;
  }

 private:
  int dim_;
  int factor_;
};

class BlurOperator final : public ForwardOperator {
 public:
  BlurOperator(int dim, Vector kernel) : dim_(dim), kernel_(std::move(kernel)) {
    const auto len = kernel_.size();
    if (dim < 1 || len < 1 || len > dim) {
      throw std::invalid_argument("blur: kernel length must lie in [1, dim]");
    }
    if (!kernel_.allFinite() || std::abs(kernel_.sum() - 1.0) > 1e-12) {
      throw std::invalid_argument("blur: kernel must sum to 1");
    }
    center_ = static_cast<int>(len / 2);
  }
  std::string kind() const override { return "blur"; }
  int in_dim() const override { return dim_; }
  int out_dim() const override { return dim_; }
  bool linear() const override { return true; }
  // y_i = sum_j k_j x_{i - (j - c)}
  Vector apply(const Vector& x) const override {
    check_input(*this, x);
    Vector y = Vector::Zero(dim_);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < kernel_.size(); ++j) y[i] += kernel_[j] * x[wrap(i - j + center_)];
    return y;
  }
  // adjoint: g_n = sum_j k_j v_{n + j - c}
  Vector vjp(const Vector&, const Vector& v) const override {
    check_output(*this, v);
    Vector g = Vector::Zero(dim_);
    for (int n = 0; n < dim_; ++n)
      for (int j = 0; j < kernel_.size(); ++j) g[n] += kernel_[j] * v[wrap(n + j - center_)];
    return g;
  }

 private:
  int wrap(int i) const { return ((i % dim_) + dim_) % dim_; }
  int dim_;
  Vector kernel_;
  int center_ = 0;
};

class DenseOperator final : public ForwardOperator {
 public:
  explicit DenseOperator(Matrix m) : m_(std::move(m)) {
    if (m_.rows() < 1 || m_.cols() < 1 || !m_.allFinite()) {
      throw std::invalid_argument("dense: matrix must be finite and non-empty");
    }
  }
  std::string kind() const override { return "dense"; }
  int in_dim() const override { return static_cast<int>(m_.cols()); }
  int out_dim() const override { return static_cast<int>(m_.rows()); }
  bool linear() const override { return true; }
  Vector apply(const Vector& x) const override {
    check_input(*this, x);
    return m_ * x;
  }
  Vector vjp(const Vector&, const Vector& v) const override {
    check_output(*this, v);
    return m_.transpose() * v;
  }
  Matrix matrix() const override { return m_; }

 private:
  Matrix m_;
};

class PhaseRetrievalOperator final : public ForwardOperator {
 public:
  PhaseRetrievalOperator(int dim, int oversample, double delta)
      : dim_(dim), n_(dim * oversample), delta_(delta) {
    if (dim < 2) throw std::invalid_argument("phase_retrieval: dimension must be >= 2");
    if (oversample < 1) throw std::invalid_argument("phase_retrieval: oversample must be >= 1");
    cos_.resize(n_, dim_);
    sin_.resize(n_, dim_);
    for (int j = 0; j < n_; ++j) {
      for (int k = 0; k < dim_; ++k) {
        // Reduce jk mod n before scaling to keep the angle exact-ish.
        const double ang = 2.0 * std::numbers::pi * static_cast<double>((1LL * j * k) % n_) / n_;
        cos_(j, k) = std::cos(ang);
        sin_(j, k) = std::sin(ang);
      }
    }
  }
  std::string kind() const override { return "phase_retrieval"; }
  int in_dim() const override { return dim_; }
  int out_dim() const override { return n_; }
  bool linear() const override { return false; }

  // z_j = sum_k x_k exp(-2 pi i jk / n): re = C x, im = -S x
  Vector apply(const Vector& x) const override {
    check_input(*this, x);
    const Vector re = cos_ * x;
    const Vector im = sin_ * x;
    return (re.array().square() + im.array().square()).sqrt().matrix();
  }
  // d m_j / d x_k = (re_j C_jk + im'_j S_jk) / m_j with im' = S x (sign cancels)
  Vector vjp(const Vector& x, const Vector& v) const override {
    check_input(*this, x);
    check_output(*this, v);
    const Vector re = cos_ * x;
    const Vector im = sin_ * x;
    const Vector mag =
        (re.array().square() + im.array().square() + delta_ * delta_).sqrt().matrix();
    const Vector w = v.cwiseQuotient(mag);
    return cos_.transpose() * w.cwiseProduct(re) + sin_.transpose() * w.cwiseProduct(im);
  }

 private:
  int dim_;
  int n_;
  double delta_;
  Matrix cos_;
  Matrix sin_;
};

}  // namespace

OperatorPtr make_mask_operator(int dim, std::vector<int> kept) {
  return std::make_shared<MaskOperator>(dim, std::move(kept));
}

OperatorPtr make_downsample_operator(int dim, int factor) {
  return std::make_shared<DownsampleOperator>(dim, factor);
}

OperatorPtr make_blur_operator(int dim, Vector kernel) {
  return std::make_shared<BlurOperator>(dim, std::move(kernel));
}

OperatorPtr make_dense_operator(Matrix matrix) {
  return std::make_shared<DenseOperator>(std::move(matrix));
}

OperatorPtr make_phase_retrieval_operator(int dim, int oversample, double delta) {
  return std::make_shared<PhaseRetrievalOperator>(dim, oversample, delta);
}

Vector gaussian_kernel(int length, double width) {
  if (length < 1 || !(width > 0.0)) throw std::invalid_argument("gaussian_kernel: bad parameters");
  Vector k(length);
  const double c = (length - 1) / 2.0;
  for (int i = 0; i < length; ++i) k[i] = std::exp(-0.5 * std::pow((i - c) / width, 2));
  return k / k.sum();
}

Vector motion_kernel(int length) {
  if (length < 1) throw std::invalid_argument("motion_kernel: length must be >= 1");
  return Vector::Constant(length, 1.0 / length);
}

Measurement make_measurement(const Vector& x_true, OperatorPtr op, double sigma, Rng& rng) {
  if (!op) throw std::invalid_argument("make_measurement: null operator");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("make_measurement: sigma must be finite and positive");
  }
  Measurement m;
  m.y = op->apply(x_true) + sigma * rng.normal_vector(op->out_dim());
  m.sigma = sigma;
  m.rho = 1.0 / (sigma * sigma);
  m.op = std::move(op);
  return m;
}

}  // namespace dpmc
