#include "dpmc/rng.hpp"

namespace dpmc {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t combine(std::uint64_t key, std::uint64_t tag, std::uint64_t index) {
  return splitmix64(splitmix64(key ^ tag) + kGolden * (index + 1));
}
}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// FNV-1a
std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed, std::string_view tag, std::uint64_t index)
    : key_(combine(splitmix64(seed), hash_tag(tag), index)) {}

Rng::Rng(FromKey, std::uint64_t key) : key_(key) {}

Rng::result_type Rng::operator()() {
  ++counter_;
  return splitmix64(key_ + kGolden * counter_);
}

Rng Rng::derive(std::string_view tag, std::uint64_t index) const {
  return Rng(FromKey{}, combine(key_, hash_tag(tag), index));
}

double Rng::uniform() {
  // 53 high bits -> [0, 1)
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Rng::normal() { return gauss_(*this); }

Vector Rng::normal_vector(Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

}  // namespace dpmc
