#pragma once

#include <cmath>
#include <random>

#include "foodsys/inference.hpp"
#include "foodsys/model.hpp"

namespace foodsys::testing {

// Log-uniform positive parameters spanning two decades, kappa uniform in (0.02, 0.98).
inline DimensionlessParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lg(std::log(0.1), std::log(10.0));
  std::uniform_real_distribution<double> unit(0.02, 0.98);
  auto pick = [&] { return std::exp(lg(rng)); };
  DimensionlessParams p;
  p.alpha = pick();
  p.beta = pick();
  p.delta = pick();
  p.omega = pick();
  p.gamma = pick();
  p.kappa = unit(rng);
  p.mu = pick();
  p.rho = pick();
  return p;
}

// Posterior means reported for the UK pork industry, b and g fixed.
inline DimensionalParams uk_means() {
  DimensionalParams p;
  p.a = 0.0086;
  p.b = 138.3;
  p.e = 0.0002;
  p.f = 2.2712;
  p.g = 82.4;
  p.w = 0.2392;
  p.s = 0.6703;
  p.k = 0.3602;
  p.h = 219478906.0;
  p.m = 0.0937;
  p.q = 132.0101;
  p.r = 0.1514;
  return p;
}

// Equilibrium of the dimensional model at the UK means.
inline InitialState uk_equilibrium() {
  const auto p = uk_means();
  const double P = p.b * (1.0 + p.e / p.a);
  const double D = p.h * p.q / P;
  const double I = p.s * D;
  const double C = (D * (p.w * p.s + 0.5) - p.k * p.h) / ((1.0 - p.k) * p.f * p.g);
  return {C, I, D, P};
}

inline ModelDraw uk_truth(double noise = 0.05) {
  const auto eq = uk_equilibrium();
  return {uk_means(), {0.97 * eq.C0, 1.1 * eq.I0, eq.D0, 0.9 * eq.P0}, {noise, noise, noise, noise, noise, noise}};
}

inline double max_abs_diff(const Vec4& a, const Vec4& b) {
  double d = 0.0;
  for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

} // namespace foodsys::testing
