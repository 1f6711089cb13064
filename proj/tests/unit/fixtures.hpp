#pragma once

#include "dpmc/gmm.hpp"

namespace dpmc::test {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Matrix sym2(double a, double b, double c) {
  Matrix m(2, 2);
  m << a, b, b, c;
  return m;
}

// The bundled 2-D three-component prior.
inline GaussianMixture prior2d() {
  GaussianMixture g;
  g.weights = vec({0.3, 0.4, 0.3});
  g.means = {vec({-1.5, -1.0}), vec({0.3, 1.5}), vec({1.5, -1.2})};
  g.covariances = {sym2(0.35, 0.1, 0.3), sym2(0.4, -0.15, 0.35), sym2(0.3, 0.05, 0.4)};
  return g;
}

}  // namespace dpmc::test
