#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace dpmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Counter-based generator. Word i of a stream is the SplitMix64 finalizer
/// applied to (key + (i + 1) * golden_gamma), where key is derived from
/// (master seed, purpose tag, index). Streams never share state, so any
/// number of them can be derived independently and consumed in any order.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::string_view tag = "root", std::uint64_t index = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Child stream keyed on this stream's key, a tag and an index. Does not
  /// advance this stream.
  Rng derive(std::string_view tag, std::uint64_t index = 0) const;

  double uniform();  // [0, 1)
  double normal();
  Vector normal_vector(Eigen::Index n);

  std::uint64_t key() const { return key_; }

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key);

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_tag(std::string_view tag);

}  // namespace dpmc
