#pragma once

#include <span>
#include <vector>

#include "foodsys/integrator.hpp"
#include "foodsys/model.hpp"

namespace foodsys {

// Integrator settings used for model trajectories: positivity enforced by step rejection.
inline IntegratorConfig model_integrator_config(IntegratorConfig cfg = {}) {
  cfg.require_nonnegative = true;
  return cfg;
}

inline std::vector<double> regular_times(double t0, double t1, double step) {
  if (!(step > 0.0) || !(t1 > t0)) throw usage_error("regular_times needs t1 > t0 and step > 0");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((t1 - t0) / step + 1e-9));
  out.reserve(n + 2);
  for (std::size_t i = 0; i <= n; ++i) out.push_back(t0 + static_cast<double>(i) * step);
  if (out.back() < t1) out.push_back(t1);
  if (out.back() > t1) out.back() = t1;
  return out;
}

inline Trajectory simulate_dimensional(const DimensionalParams& p, const InitialState& s0,
                                       std::span<const double> obs_times,
                                       const IntegratorConfig& cfg = model_integrator_config()) {
  validate(p);
  validate(s0);
  if (obs_times.empty()) throw usage_error("no output times requested");
  auto rhs = [&p](double, const Vec4& y) { return rhs_dimensional(y, p); };
  const double t1 = obs_times.back() > 0.0 ? obs_times.back() : 1.0;
  auto sol = integrate<4>(rhs, s0.as_vector(), 0.0, t1, obs_times, cfg);
  return {Frame::dimensional, std::move(sol.times), std::move(sol.states)};
}

inline Trajectory simulate_dimensionless(const DimensionlessParams& p, const Vec4& u0,
                                         std::span<const double> obs_times,
                                         const IntegratorConfig& cfg = model_integrator_config()) {
  if (obs_times.empty()) throw usage_error("no output times requested");
  auto rhs = [&p](double, const Vec4& y) { return rhs_dimensionless(y, p); };
  const double t1 = obs_times.back() > 0.0 ? obs_times.back() : 1.0;
  auto sol = integrate<4>(rhs, u0, 0.0, t1, obs_times, cfg);
  return {Frame::dimensionless, std::move(sol.times), std::move(sol.states)};
}

} // namespace foodsys
