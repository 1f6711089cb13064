#include "dpmc/denoiser.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dpmc {

namespace {

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  // Row-major fill so the draw order matches the serialized layout.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  return m;
}

Vector embedding(int embed, int t, int steps) {
  Vector e(embed);
  const double s = static_cast<double>(t) / steps;
  for (int j = 0; j < embed / 2; ++j) {
    const double w = std::ldexp(1.0, j);
    e[2 * j] = std::sin(w * s);
    e[2 * j + 1] = std::cos(w * s);
  }
  return e;
}

}  // namespace

DenoiserNet DenoiserNet::initialize(int dim, Rng& rng, int hidden, int embed) {
  DenoiserNet net = zeros(dim, hidden, embed);
  net.w1 = gaussian_matrix(hidden, dim + embed, 1.0 / std::sqrt(dim + embed), rng);
  net.w2 = gaussian_matrix(hidden, hidden, 1.0 / std::sqrt(hidden), rng);
  net.w3 = gaussian_matrix(dim, hidden, 1.0 / std::sqrt(hidden), rng);
  return net;
}

DenoiserNet DenoiserNet::zeros(int dim, int hidden, int embed) {
  if (dim < 1 || hidden < 1 || embed < 2 || embed % 2 != 0) {
    throw std::invalid_argument("DenoiserNet: invalid layer sizes");
  }
  DenoiserNet net;
  net.dim = dim;
  net.embed = embed;
  net.hidden1 = hidden;
  net.hidden2 = hidden;
  net.w1 = Matrix::Zero(hidden, dim + embed);
  net.b1 = Vector::Zero(hidden);
  net.w2 = Matrix::Zero(hidden, hidden);
  net.b2 = Vector::Zero(hidden);
  net.w3 = Matrix::Zero(dim, hidden);
  net.b3 = Vector::Zero(dim);
  return net;
}

Vector DenoiserNet::time_embedding(int t, int steps) const { return embedding(embed, t, steps); }

Vector DenoiserNet::forward(const Vector& x, int t, int steps) const {
  Vector u(dim + embed);
  u << x, time_embedding(t, steps);
  const Vector a1 = (w1 * u + b1).array().tanh().matrix();
  const Vector a2 = (w2 * a1 + b2).array().tanh().matrix();
  return w3 * a2 + b3;
}

Vector DenoiserNet::input_vjp(const Vector& x, int t, int steps, const Vector& v) const {
  Vector u(dim + embed);
  u << x, time_embedding(t, steps);
  const Vector a1 = (w1 * u + b1).array().tanh().matrix();
  const Vector a2 = (w2 * a1 + b2).array().tanh().matrix();
  const Vector d2 = ((w3.transpose() * v).array() * (1.0 - a2.array().square())).matrix();
  const Vector d1 = ((w2.transpose() * d2).array() * (1.0 - a1.array().square())).matrix();
  return (w1.transpose() * d1).head(dim);
}

bool DenoiserNet::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() &&
         w3.allFinite() && b3.allFinite();
}

std::size_t DenoiserNet::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + w3.size() +
                                  b3.size());
}

Vector denoiser_eps(const DenoiserNet& net, const Vector& x, int t, const NoiseSchedule& s) {
  if (x.size() != net.dim) throw std::invalid_argument("denoiser_eps: dimension mismatch");
  (void)s.bar_alpha(t);
  return net.forward(x, t, s.steps());
}

Vector denoiser_x0hat_vjp(const DenoiserNet& net, const Vector& x, int t, const Vector& v,
                          const NoiseSchedule& s) {
  if (x.size() != net.dim || v.size() != net.dim) {
    throw std::invalid_argument("denoiser_x0hat_vjp: dimension mismatch");
  }
  const double ab = s.bar_alpha(t);
  return (v - std::sqrt(1.0 - ab) * net.input_vjp(x, t, s.steps(), v)) / std::sqrt(ab);
}

DenoiserModel::DenoiserModel(DenoiserNet net, NoiseSchedule schedule)
    : net_(std::move(net)), schedule_(std::move(schedule)) {
  if (!net_.all_finite()) throw std::invalid_argument("DenoiserModel: non-finite parameters");
}

Vector DenoiserModel::eps(const Vector& x, int t) const {
  return denoiser_eps(net_, x, t, schedule_);
}

Vector DenoiserModel::x0hat_vjp(const Vector& x, int t, const Vector& v) const {
  return denoiser_x0hat_vjp(net_, x, t, v, schedule_);
}

// ---------------------------------------------------------------- training

namespace {

struct Batch {
  Matrix inputs;   // (dim + embed) x B
  Matrix targets;  // dim x B
};

Batch make_batch(const DenoiserNet& net, const std::vector<Vector>& x0, const std::vector<int>& t,
                 const std::vector<Vector>& eps, const NoiseSchedule& s) {
  const auto n = static_cast<Eigen::Index>(x0.size());
  Batch b{Matrix(net.dim + net.embed, n), Matrix(net.dim, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    b.inputs.col(i) << forward_marginal(x0[k], t[k], eps[k], s),
        net.time_embedding(t[k], s.steps());
    b.targets.col(i) = eps[k];
  }
  return b;
}

double batch_loss(const DenoiserNet& net, const Batch& b) {
  const Matrix a1 = ((net.w1 * b.inputs).colwise() + net.b1).array().tanh().matrix();
  const Matrix a2 = ((net.w2 * a1).colwise() + net.b2).array().tanh().matrix();
  const Matrix out = (net.w3 * a2).colwise() + net.b3;
  return (out - b.targets).colwise().squaredNorm().mean();
}

// One gradient-descent step on the batch; returns the pre-update loss.
double descend(DenoiserNet& net, const Batch& b, double lr) {
  const double n = static_cast<double>(b.inputs.cols());
  const Matrix a1 = ((net.w1 * b.inputs).colwise() + net.b1).array().tanh().matrix();
  const Matrix a2 = ((net.w2 * a1).colwise() + net.b2).array().tanh().matrix();
  const Matrix out = (net.w3 * a2).colwise() + net.b3;
  const Matrix resid = out - b.targets;
  const double loss = resid.colwise().squaredNorm().mean();

  const Matrix d_out = (2.0 / n) * resid;
  const Matrix d_z2 = ((net.w3.transpose() * d_out).array() * (1.0 - a2.array().square())).matrix();
  const Matrix d_z1 = ((net.w2.transpose() * d_z2).array() * (1.0 - a1.array().square())).matrix();

  net.w3 -= lr * d_out * a2.transpose();
  net.b3 -= lr * d_out.rowwise().sum();
  net.w2 -= lr * d_z2 * a1.transpose();
  net.b2 -= lr * d_z2.rowwise().sum();
  net.w1 -= lr * d_z1 * b.inputs.transpose();
  net.b1 -= lr * d_z1.rowwise().sum();
  return loss;
}

int uniform_level(Rng& rng, int steps) {
  return 1 + static_cast<int>(rng.uniform() * steps);
}

}  // namespace

double denoising_loss(const DenoiserNet& net, const std::vector<Vector>& x0,
                      const std::vector<int>& t, const std::vector<Vector>& eps,
                      const NoiseSchedule& s) {
  if (x0.empty()) return 0.0;
  return batch_loss(net, make_batch(net, x0, t, eps, s));
}

TrainResult train_denoiser(const std::vector<Vector>& dataset, const NoiseSchedule& s,
                           const TrainConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("train_denoiser: empty dataset");
  if (config.epochs < 0 || config.batch < 1 || !std::isfinite(config.learning_rate) ||
      config.learning_rate <= 0.0) {
    throw std::invalid_argument("train_denoiser: invalid hyper-parameters");
  }
  const int dim = static_cast<int>(dataset.front().size());
  for (const auto& x : dataset) {
    if (x.size() != dim || !x.allFinite()) {
      throw std::invalid_argument("train_denoiser: dataset rows must be finite and equal-sized");
    }
  }

  const Rng root(config.seed, "train");
  Rng init_rng = root.derive("init");
  TrainResult result{DenoiserNet::initialize(dim, init_rng), {}, 0.0, 0.0};

  // Fixed probe set for before/after comparison.
  Rng probe_rng = root.derive("probe");
  std::vector<Vector> probe_x0, probe_eps;
  std::vector<int> probe_t;
  for (int i = 0; i < config.probe_size; ++i) {
    probe_x0.push_back(dataset[static_cast<std::size_t>(probe_rng.uniform() * dataset.size())]);
    probe_t.push_back(uniform_level(probe_rng, s.steps()));
    probe_eps.push_back(probe_rng.normal_vector(dim));
  }
  result.initial_loss = denoising_loss(result.net, probe_x0, probe_t, probe_eps, s);

  std::vector<std::size_t> order(dataset.size());
  const int batches_per_epoch =
      static_cast<int>((dataset.size() + static_cast<std::size_t>(config.batch) - 1) /
                       static_cast<std::size_t>(config.batch));
  const long long total_steps = static_cast<long long>(config.epochs) * batches_per_epoch;
  long long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = root.derive("epoch", static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      std::vector<Vector> x0, eps;
      std::vector<int> t;
      for (std::size_t i = start; i < stop; ++i) {
        x0.push_back(dataset[order[i]]);
        t.push_back(uniform_level(rng, s.steps()));
        eps.push_back(rng.normal_vector(dim));
      }
      double lr = config.learning_rate;
      if (config.cosine_decay && total_steps > 0) {
        lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
      }
      const double loss = descend(result.net, make_batch(result.net, x0, t, eps, s), lr);
      if (!std::isfinite(loss) || !result.net.all_finite()) {
        throw std::runtime_error("train_denoiser: diverged at epoch " + std::to_string(epoch) +
                                 ", step " + std::to_string(step) + " (lr " +
                                 std::to_string(lr) + "); reduce learning_rate");
      }
      sum += loss;
      ++step;
    }
    result.epoch_loss.push_back(sum / batches_per_epoch);
  }
  result.final_loss = denoising_loss(result.net, probe_x0, probe_t, probe_eps, s);
  return result;
}

// ----------------------------------------------------------- serialization

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'P', 'M', 'C', 'N', 'E', 'T', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int c = is.get();
    if (c == EOF) throw std::runtime_error("load_net: truncated header");
    v |= static_cast<std::uint32_t>(c & 0xff) << (8 * i);
  }
  return v;
}

double get_f64(std::istream& is) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = is.get();
    if (c == EOF) throw std::runtime_error("load_net: truncated parameters");
    bits |= static_cast<std::uint64_t>(c & 0xff) << (8 * i);
  }
  double d;
  std::memcpy(&d, &bits, sizeof d);
  return d;
}

void put_matrix(std::ostream& os, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(os, m(r, c));
}

void get_matrix(std::istream& is, Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get_f64(is);
}

void put_vector(std::ostream& os, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(os, v[i]);
}

void get_vector(std::istream& is, Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get_f64(is);
}

}  // namespace

void save_net(const DenoiserNet& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_net: cannot open " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, static_cast<std::uint32_t>(net.dim));
  put_u32(os, static_cast<std::uint32_t>(net.hidden1));
  put_u32(os, static_cast<std::uint32_t>(net.hidden2));
  put_u32(os, static_cast<std::uint32_t>(net.embed));
  put_matrix(os, net.w1);
  put_vector(os, net.b1);
  put_matrix(os, net.w2);
  put_vector(os, net.b2);
  put_matrix(os, net.w3);
  put_vector(os, net.b3);
  if (!os) throw std::runtime_error("save_net: write failed for " + path.string());
}

DenoiserNet load_net(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_net: cannot open " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw std::runtime_error("load_net: bad magic in " + path.string());
  const auto dim = static_cast<int>(get_u32(is));
  const auto h1 = static_cast<int>(get_u32(is));
  const auto h2 = static_cast<int>(get_u32(is));
  const auto embed = static_cast<int>(get_u32(is));
  if (dim < 1 || h1 < 1 || h2 < 1 || embed < 2 || embed % 2 != 0) {
    throw std::runtime_error("load_net: invalid header in " + path.string());
  }
  DenoiserNet net;
  net.dim = dim;
  net.hidden1 = h1;
  net.hidden2 = h2;
  net.embed = embed;
  net.w1.resize(h1, dim + embed);
  net.b1.resize(h1);
  net.w2.resize(h2, h1);
  net.b2.resize(h2);
  net.w3.resize(dim, h2);
  net.b3.resize(dim);
  get_matrix(is, net.w1);
  get_vector(is, net.b1);
  get_matrix(is, net.w2);
  get_vector(is, net.b2);
  get_matrix(is, net.w3);
  get_vector(is, net.b3);
  if (is.peek() != EOF) throw std::runtime_error("load_net: trailing bytes in " + path.string());
  return net;
}

}  // namespace dpmc
