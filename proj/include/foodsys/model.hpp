#pragma once

// Four-state national food-system model: capital C, inventory I, demand D and
// price P, in dimensional form and in the rescaled form (v, x, y, z) with
// eight dimensionless groups.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "foodsys/errors.hpp"

namespace foodsys {

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<Vec4, 4>;

enum class Frame { dimensional, dimensionless };

inline const char* to_string(Frame f) {
  return f == Frame::dimensional ? "dimensional" : "dimensionless";
}

struct DimensionalParams {
  double a = 0;  // capital growth rate [1/month]
  double b = 0;  // cost of capital production [price/inventory-unit]
  double e = 0;  // capital depreciation rate [1/month]
  double f = 0;  // capital production rate [1/month]
  double g = 0;  // capital conversion factor [inventory-units/capital-unit]
  double w = 0;  // waste rate [1/month]
  double s = 0;  // reference coverage [month]
  double k = 0;  // trade strength, in [0, 1)
  double h = 0;  // reference demand [inventory-units/month]
  double m = 0;  // demand response rate [1/month]
  double q = 0;  // reference price [price/inventory-unit]
  double r = 0;  // price growth rate [1/month]

  friend bool operator==(const DimensionalParams&, const DimensionalParams&) = default;
};

struct InitialState {
  double C0 = 0;
  double I0 = 0;
  double D0 = 0;
  double P0 = 0;

  Vec4 as_vector() const { return {C0, I0, D0, P0}; }
  friend bool operator==(const InitialState&, const InitialState&) = default;
};

struct DimensionlessParams {
  double alpha = 0;  // q/b
  double beta = 0;   // e/a
  double delta = 0;  // f g C0 / (a h s)
  double omega = 0;  // w/a
  double gamma = 0;  // 1/(a s)
  double kappa = 0;  // k
  double mu = 0;     // m/a
  double rho = 0;    // r/a

  friend bool operator==(const DimensionlessParams&, const DimensionlessParams&) = default;
};

struct SystemState {
  Frame frame = Frame::dimensionless;
  Vec4 values{};
};

struct Trajectory {
  Frame frame = Frame::dimensionless;
  std::vector<double> times;
  std::vector<Vec4> states;
};

namespace detail {

inline void require_positive(double value, const char* name) {
  if (!std::isfinite(value) || value <= 0.0)
    throw domain_error(std::string("parameter '") + name + "' must be finite and > 0");
}

inline void require_trade_strength(double value, const char* name) {
  if (!std::isfinite(value) || value < 0.0 || value >= 1.0)
    throw domain_error(std::string("parameter '") + name + "' must lie in [0, 1)");
}

} // namespace detail

inline void validate(const DimensionalParams& p) {
  detail::require_positive(p.a, "a");
  detail::require_positive(p.b, "b");
  detail::require_positive(p.e, "e");
  detail::require_positive(p.f, "f");
  detail::require_positive(p.g, "g");
  detail::require_positive(p.w, "w");
  detail::require_positive(p.s, "s");
  detail::require_trade_strength(p.k, "k");
  detail::require_positive(p.h, "h");
  detail::require_positive(p.m, "m");
  detail::require_positive(p.q, "q");
  detail::require_positive(p.r, "r");
}

inline void validate(const InitialState& s) {
  detail::require_positive(s.C0, "C0");
  detail::require_positive(s.I0, "I0");
  detail::require_positive(s.D0, "D0");
  detail::require_positive(s.P0, "P0");
}

inline void validate(const DimensionlessParams& p) {
  detail::require_positive(p.alpha, "alpha");
  detail::require_positive(p.beta, "beta");
  detail::require_positive(p.delta, "delta");
  detail::require_positive(p.omega, "omega");
  detail::require_positive(p.gamma, "gamma");
  detail::require_trade_strength(p.kappa, "kappa");
  detail::require_positive(p.mu, "mu");
  detail::require_positive(p.rho, "rho");
}

struct Nondimensionalised {
  DimensionlessParams params;
  SystemState initial;  // (1, I0/(h s), D0/h, P0/q)
  double time_scale;    // tau = time_scale * t
};

inline Nondimensionalised nondimensionalise(const DimensionalParams& p, const InitialState& s0) {
  validate(p);
  validate(s0);
  DimensionlessParams d;
  d.alpha = p.q / p.b;
  d.beta = p.e / p.a;
  d.delta = p.f * p.g * s0.C0 / (p.a * p.h * p.s);
  d.omega = p.w / p.a;
  d.gamma = 1.0 / (p.a * p.s);
  d.kappa = p.k;
  d.mu = p.m / p.a;
  d.rho = p.r / p.a;
  SystemState x0{Frame::dimensionless, {1.0, s0.I0 / (p.h * p.s), s0.D0 / p.h, s0.P0 / p.q}};
  return {d, x0, p.a};
}

// Dimensionless state -> dimensional state.
inline Vec4 redimensionalise(const Vec4& u, const DimensionalParams& p, const InitialState& s0) {
  return {u[0] * s0.C0, u[1] * p.h * p.s, u[2] * p.h, u[3] * p.q};
}

inline Vec4 to_dimensionless(const Vec4& c, const DimensionalParams& p, const InitialState& s0) {
  return {c[0] / s0.C0, c[1] / (p.h * p.s), c[2] / p.h, c[3] / p.q};
}

inline Trajectory redimensionalise(const Trajectory& traj, const DimensionalParams& p,
                                   const InitialState& s0) {
  if (traj.frame != Frame::dimensionless)
    throw usage_error("redimensionalise expects a dimensionless trajectory");
  validate(p);
  validate(s0);
  Trajectory out;
  out.frame = Frame::dimensional;
  out.times.reserve(traj.times.size());
  out.states.reserve(traj.states.size());
  for (double tau : traj.times) out.times.push_back(tau / p.a);
  for (const auto& u : traj.states) out.states.push_back(redimensionalise(u, p, s0));
  return out;
}

inline Trajectory nondimensionalise(const Trajectory& traj, const DimensionalParams& p,
                                    const InitialState& s0) {
  if (traj.frame != Frame::dimensional)
    throw usage_error("nondimensionalise expects a dimensional trajectory");
  validate(p);
  validate(s0);
  Trajectory out;
  out.frame = Frame::dimensionless;
  for (double t : traj.times) out.times.push_back(t * p.a);
  for (const auto& c : traj.states) out.states.push_back(to_dimensionless(c, p, s0));
  return out;
}

// Fraction of demand met from stock, I/(sD + I), times D; zero when both I and D vanish.
inline double consumption(double inventory, double demand, double coverage) {
  const double denom = coverage * demand + inventory;
  if (std::abs(denom) < 1e-300) return 0.0;
  return inventory * demand / denom;
}

// dC/dt, dI/dt, dD/dt, dP/dt.
inline Vec4 rhs_dimensional(const Vec4& state, const DimensionalParams& p) {
  const double C = state[0], I = state[1], D = state[2], P = state[3];
  if (!(I > 0.0)) throw singularity_error("inventory must be > 0");
  if (!(P > 0.0)) throw singularity_error("price must be > 0");
  const double production = p.f * p.g * C;
  return {
      p.a * C * (P / p.b - 1.0) - p.e * C,
      production - p.w * I - consumption(I, D, p.s) + p.k * (p.h - production),
      p.m * (p.h * p.q / P - D),
      p.r * P * (p.s * D / I - 1.0),
  };
}

// dv/dtau, dx/dtau, dy/dtau, dz/dtau.
inline Vec4 rhs_dimensionless(const Vec4& state, const DimensionlessParams& p) {
  const double v = state[0], x = state[1], y = state[2], z = state[3];
  if (!(x > 0.0)) throw singularity_error("rescaled inventory must be > 0");
  if (!(z > 0.0)) throw singularity_error("rescaled price must be > 0");
  return {
      v * (p.alpha * z - 1.0) - p.beta * v,
      p.delta * v - p.omega * x - p.gamma * consumption(x, y, 1.0) + p.kappa * (p.gamma - p.delta * v),
      p.mu * (1.0 / z - y),
      p.rho * z * (y / x - 1.0),
  };
}

// Componentwise dimensionless RHS on the closure of the state space. A component is
// empty where its expression is undefined (1/z at z = 0, y/x at x = 0 with z > 0).
inline std::array<std::optional<double>, 4> rhs_dimensionless_where_defined(
    const Vec4& state, const DimensionlessParams& p) {
  const double v = state[0], x = state[1], y = state[2], z = state[3];
  std::array<std::optional<double>, 4> out;
  out[0] = v * (p.alpha * z - 1.0) - p.beta * v;
  out[1] = p.delta * v - p.omega * x - p.gamma * consumption(x, y, 1.0) + p.kappa * (p.gamma - p.delta * v);
  if (z != 0.0) out[2] = p.mu * (1.0 / z - y);
  if (z == 0.0)
    out[3] = 0.0;
  else if (x != 0.0)
    out[3] = p.rho * z * (y / x - 1.0);
  return out;
}

// Analytic partial derivatives of rhs_dimensionless; rows are equations (v, x, y, z),
// columns are state components. v may be zero.
inline Mat4 jacobian_dimensionless(const Vec4& state, const DimensionlessParams& p) {
  const double v = state[0], x = state[1], y = state[2], z = state[3];
  if (!(x > 0.0)) throw singularity_error("jacobian undefined for x <= 0");
  if (!(z > 0.0)) throw singularity_error("jacobian undefined for z <= 0");
  if (!(x + y > 0.0)) throw singularity_error("jacobian undefined for x + y <= 0");
  const double sum2 = (x + y) * (x + y);
  Mat4 J{};
  J[0] = {p.alpha * z - 1.0 - p.beta, 0.0, 0.0, p.alpha * v};
  J[1] = {p.delta * (1.0 - p.kappa), -p.omega - p.gamma * y * y / sum2, -p.gamma * x * x / sum2, 0.0};
  J[2] = {0.0, 0.0, -p.mu, -p.mu / (z * z)};
  J[3] = {0.0, -p.rho * z * y / (x * x), p.rho * z / x, p.rho * (y / x - 1.0)};
  return J;
}

// Flows of the dimensional model at capital level C: production f g C, imports k h,
// exports k f g C, and the inventory inflow production + imports - exports.
struct Flows {
  double production;
  double imports;
  double exports;
  double inflow;
};

inline Flows flows(double capital, const DimensionalParams& p) {
  const double production = p.f * p.g * capital;
  const double imports = p.k * p.h;
  const double exports = p.k * production;
  return {production, imports, exports, production + imports - exports};
}

} // namespace foodsys
