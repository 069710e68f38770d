#pragma once

// Equilibria of the dimensionless model, their linear stability, the critical and
// surplus ratios, and regime classification over parameter grids.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "foodsys/errors.hpp"
#include "foodsys/integrator.hpp"
#include "foodsys/model.hpp"
#include "foodsys/simulate.hpp"

namespace foodsys {

inline constexpr double default_tol_zero = 1e-9;

// alpha (omega + gamma/2) / (kappa gamma (1 + beta)). Below one, the imports-only
// equilibrium with no domestic capital is stable.
inline double critical_ratio(const DimensionlessParams& p) {
  if (!(p.kappa > 0.0))
    throw domain_error("critical ratio is undefined without trade (kappa = 0)");
  return p.alpha * (p.omega + 0.5 * p.gamma) / (p.kappa * p.gamma * (1.0 + p.beta));
}

// alpha (omega + gamma/2) / (gamma (1 + beta)) = kappa * critical ratio. Above one the
// sustainable equilibrium is a net exporter.
inline double surplus_ratio(const DimensionlessParams& p) {
  return p.alpha * (p.omega + 0.5 * p.gamma) / (p.gamma * (1.0 + p.beta));
}

// Same ratios straight from dimensional parameters; delta (and so f, g, h, C0) drops out.
inline double surplus_ratio(const DimensionalParams& p) {
  const double alpha = p.q / p.b, beta = p.e / p.a, omega = p.w / p.a, gamma = 1.0 / (p.a * p.s);
  return alpha * (omega + 0.5 * gamma) / (gamma * (1.0 + beta));
}

inline double critical_ratio(const DimensionalParams& p) {
  if (!(p.k > 0.0)) throw domain_error("critical ratio is undefined without trade (k = 0)");
  return surplus_ratio(p) / p.k;
}

struct CriticalTradeStrength {
  double kappa;    // trade strength at which the critical ratio equals one
  bool reachable;  // false when kappa >= 1, i.e. no admissible trade strength collapses the industry
};

inline CriticalTradeStrength critical_trade_strength(const DimensionlessParams& p) {
  const double k = surplus_ratio(p);
  return {k, k < 1.0};
}

enum class FixedPointKind {
  origin,
  no_trade_interior,
  imports_only_trivial,
  unsustainable_domestic,
  sustainable_domestic,
};

inline const char* to_string(FixedPointKind k) {
  switch (k) {
    case FixedPointKind::origin: return "origin";
    case FixedPointKind::no_trade_interior: return "no_trade_interior";
    case FixedPointKind::imports_only_trivial: return "imports_only_trivial";
    case FixedPointKind::unsustainable_domestic: return "unsustainable_domestic";
    case FixedPointKind::sustainable_domestic: return "sustainable_domestic";
  }
  return "unknown";
}

struct FixedPoint {
  FixedPointKind kind;
  Vec4 state{};  // dimensionless (v, x, y, z)
  bool exists = true;
  std::string reason;
  // Lies on the singular set of the vector field (z = 0), so no Jacobian exists there.
  bool singular = false;
};

inline std::vector<FixedPoint> fixed_points(const DimensionlessParams& p) {
  for (double val : {p.alpha, p.beta, p.delta, p.omega, p.gamma, p.mu, p.rho})
    if (!std::isfinite(val) || val <= 0.0) throw domain_error("dimensionless parameters must be > 0");
  if (!std::isfinite(p.kappa) || p.kappa < 0.0 || p.kappa > 1.0)
    throw domain_error("kappa must lie in [0, 1]");

  const double a = p.alpha, b1 = 1.0 + p.beta;
  std::vector<FixedPoint> out;
  if (p.kappa == 0.0) {
    out.push_back({FixedPointKind::origin, {0, 0, 0, 0}, true, "no industry", true});
    const double v = a * (2.0 * p.omega + p.gamma) / (2.0 * p.delta * b1);
    out.push_back({FixedPointKind::no_trade_interior, {v, a / b1, a / b1, b1 / a}, true, "", false});
    return out;
  }

  out.push_back({FixedPointKind::imports_only_trivial,
                 {0, p.kappa * p.gamma / p.omega, 0, 0},
                 true,
                 "y = z = 0 lies on the singular set; verdict by simulation only",
                 true});
  const double xu = p.kappa * p.gamma / (p.omega + 0.5 * p.gamma);
  out.push_back({FixedPointKind::unsustainable_domestic, {0, xu, xu, 1.0 / xu}, true, "", false});

  FixedPoint sus{FixedPointKind::sustainable_domestic, {0, a / b1, a / b1, b1 / a}, false, "", false};
  if (p.kappa >= 1.0) {
    sus.reason = "kappa = 1: capital equation degenerates";
  } else {
    const double v =
        (2.0 * p.gamma * p.kappa * (-1.0 - p.beta) + a * (p.gamma + 2.0 * p.omega)) /
        (2.0 * p.delta * b1 * (1.0 - p.kappa));
    sus.state[0] = v;
    if (v > 0.0) {
      sus.exists = true;
    } else {
      sus.state[0] = 0.0;
      sus.reason = "critical ratio <= 1: domestic capital would be non-positive";
    }
  }
  out.push_back(sus);
  return out;
}

using EigenValues = std::array<std::complex<double>, 4>;

// Eigenvalues sorted by descending real part (ties: descending imaginary part).
inline EigenValues eigenvalues(const Mat4& m) {
  Eigen::Matrix4d A;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      if (!std::isfinite(m[i][j])) throw domain_error("matrix has non-finite entries");
      A(i, j) = m[i][j];
    }
  Eigen::EigenSolver<Eigen::Matrix4d> solver(A, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw domain_error("eigenvalue iteration did not converge");
  EigenValues out;
  for (int i = 0; i < 4; ++i) out[i] = solver.eigenvalues()(i);
  std::sort(out.begin(), out.end(), [](const auto& l, const auto& r) {
    if (l.real() != r.real()) return l.real() > r.real();
    return l.imag() > r.imag();
  });
  return out;
}

// lambda^3 + c2 lambda^2 + c1 lambda + c0 has all roots in the open left half-plane.
inline bool routh_hurwitz_stable_cubic(double c2, double c1, double c0) {
  return c2 > 0.0 && c0 > 0.0 && c2 * c1 > c0;
}

struct Cubic {
  double c2, c1, c0;
};

// Characteristic polynomial of the (x, y, z) block of the Jacobian at the
// unsustainable equilibrium; its roots are the three eigenvalues other than
// lambda_1 = alpha (omega + gamma/2)/(kappa gamma) - 1 - beta.
inline Cubic unsustainable_cubic(const DimensionlessParams& p) {
  const double diag = p.omega + 0.25 * p.gamma;
  return {diag + p.mu, p.mu * (diag + p.rho), p.mu * p.rho * (p.omega + 0.5 * p.gamma)};
}

inline double unsustainable_leading_eigenvalue(const DimensionlessParams& p) {
  return p.alpha * (p.omega + 0.5 * p.gamma) / (p.kappa * p.gamma) - 1.0 - p.beta;
}

// Linearisation at the origin with the singular consumption, demand and price terms
// replaced by their limits along the axes (x y/(x+y) -> 0, z/x -> 0, y/x -> 0).
inline Mat4 origin_limit_jacobian(const DimensionlessParams& p) {
  Mat4 J{};
  J[0] = {-1.0 - p.beta, 0.0, 0.0, 0.0};
  J[1] = {p.delta * (1.0 - p.kappa), -p.omega, 0.0, 0.0};
  J[2] = {0.0, 0.0, -p.mu, 0.0};
  J[3] = {0.0, 0.0, 0.0, -p.rho};
  return J;
}

enum class Verdict { stable, unstable, indeterminate };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::stable: return "stable";
    case Verdict::unstable: return "unstable";
    case Verdict::indeterminate: return "indeterminate";
  }
  return "unknown";
}

struct StabilityReport {
  FixedPoint fixed_point;
  std::optional<Mat4> jacobian;
  std::vector<std::complex<double>> eigenvalues;  // descending real part
  Verdict verdict = Verdict::indeterminate;
  bool stable = false;
  bool non_hyperbolic = false;
  std::optional<double> return_time;  // -1 / max Re(lambda) when stable
  std::string method;                  // "linearisation" or "simulation probe"
  std::string note;
};

struct ProbeResult {
  Verdict verdict;
  double initial_distance;
  double final_distance;
};

// Perturbs a point by `epsilon` in every component and integrates for `horizon`;
// escaping to 100 epsilon is unstable, settling within epsilon/10 is stable.
inline ProbeResult simulation_probe(const Vec4& point, const DimensionlessParams& p,
                                    double epsilon = 1e-3, double horizon = 100.0) {
  Vec4 start = point;
  for (auto& c : start) c += epsilon;
  auto distance = [&point](const Vec4& s) {
    double d = 0.0;
    for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(s[i] - point[i]) / std::max(1.0, std::abs(point[i])));
    return d;
  };
  const double d0 = distance(start);
  auto rhs = [&p](double, const Vec4& y) { return rhs_dimensionless(y, p); };
  auto res = event_horizon<4>(rhs, start, 0.0, horizon, model_integrator_config(),
                              [&](const Vec4& s) { return distance(s) > 100.0 * d0; });
  const double d1 = distance(res.state);
  if (res.reached) return {Verdict::unstable, d0, d1};
  if (d1 < 0.1 * d0) return {Verdict::stable, d0, d1};
  return {Verdict::indeterminate, d0, d1};
}

inline StabilityReport stability_report(const FixedPoint& fp, const DimensionlessParams& p,
                                        double tol_zero = default_tol_zero) {
  if (!fp.exists) throw usage_error("stability_report requires an existing fixed point");
  StabilityReport rep;
  rep.fixed_point = fp;

  if (fp.singular) {
    // Formal limits only; the field itself is unbounded (dy/dtau ~ mu/z) next to the point.
    if (fp.kind == FixedPointKind::origin) {
      rep.jacobian = origin_limit_jacobian(p);
      const auto ev = eigenvalues(*rep.jacobian);
      rep.eigenvalues.assign(ev.begin(), ev.end());
    }
    const auto probe = simulation_probe(fp.state, p);
    rep.verdict = probe.verdict;
    rep.method = "simulation probe";
    rep.note = "point lies on the singular set z = 0; linearisation is not valid";
  } else {
    rep.jacobian = jacobian_dimensionless(fp.state, p);
    const auto ev = eigenvalues(*rep.jacobian);
    rep.eigenvalues.assign(ev.begin(), ev.end());
    const double lead = ev.front().real();
    rep.method = "linearisation";
    if (std::abs(lead) < tol_zero) {
      rep.non_hyperbolic = true;
      rep.verdict = Verdict::indeterminate;
      rep.note = "leading eigenvalue within tol_zero of the imaginary axis";
    } else {
      rep.verdict = lead < 0.0 ? Verdict::stable : Verdict::unstable;
    }
  }
  rep.stable = rep.verdict == Verdict::stable;
  if (rep.stable && !rep.eigenvalues.empty() && fp.kind != FixedPointKind::origin)
    rep.return_time = -1.0 / rep.eigenvalues.front().real();
  return rep;
}

enum class RegimeKind { unsustainable, sustainable_net_importer, sustainable_net_exporter };

inline const char* to_string(RegimeKind r) {
  switch (r) {
    case RegimeKind::unsustainable: return "unsustainable";
    case RegimeKind::sustainable_net_importer: return "sustainable_net_importer";
    case RegimeKind::sustainable_net_exporter: return "sustainable_net_exporter";
  }
  return "unknown";
}

struct Regime {
  RegimeKind kind;
  double critical_ratio;
  double surplus_ratio;
  bool boundary = false;  // a ratio lies within the boundary band of one
};

inline Regime classify_regime(const DimensionlessParams& p, double band = 1e-9) {
  if (!(p.kappa > 0.0) || !(p.kappa < 1.0)) throw domain_error("classify_regime requires 0 < kappa < 1");
  Regime r;
  r.critical_ratio = critical_ratio(p);
  r.surplus_ratio = surplus_ratio(p);
  if (r.critical_ratio < 1.0)
    r.kind = RegimeKind::unsustainable;
  else
    r.kind = r.surplus_ratio > 1.0 ? RegimeKind::sustainable_net_exporter
                                   : RegimeKind::sustainable_net_importer;
  r.boundary = std::abs(r.critical_ratio - 1.0) < band || std::abs(r.surplus_ratio - 1.0) < band;
  return r;
}

struct RegimeGrid {
  double kappa_min = 0.025, kappa_max = 0.975;
  std::size_t kappa_steps = 20;
  double alpha_min = 0.1, alpha_max = 3.0;
  std::size_t alpha_steps = 20;
  std::vector<double> betas{0.165, 0.5, 1.0};
  double gamma = 26.0, omega = 10.0, delta = 5.0, mu = 1.0, rho = 1.0;
};

struct RegimeMapOptions {
  bool verify_by_simulation = false;
  double horizon = 500.0;
  double boundary_band = 1e-3;
  // Scaled max-norm distance from the predicted attractor that counts as converged.
  double convergence_tol = 1e-2;
  unsigned threads = 1;
  IntegratorConfig integrator = model_integrator_config();
};

struct RegimeCell {
  double kappa, alpha, beta;
  Regime regime;
  std::optional<RegimeKind> simulated;  // attractor reached from the canonical start
  std::optional<bool> agreement;
  double attractor_distance = 0.0;
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {lo};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

// Integrates from (v, x, y, z) = (1, 1, 1, 1) and reports which analytic equilibrium the
// trajectory settles on. Empty when it is not within tolerance of either.
inline std::optional<RegimeKind> simulate_attractor(const DimensionlessParams& p, const RegimeMapOptions& opt,
                                                    double* distance_out = nullptr) {
  const std::vector<double> times{opt.horizon};
  Vec4 end;
  try {
    auto traj = simulate_dimensionless(p, {1.0, 1.0, 1.0, 1.0}, times, opt.integrator);
    end = traj.states.back();
  } catch (const std::runtime_error&) {
    return std::nullopt;
  }
  auto scaled = [&end](const Vec4& fp) {
    double d = 0.0;
    for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(end[i] - fp[i]) / std::max(1.0, std::abs(fp[i])));
    return d;
  };
  double best = std::numeric_limits<double>::infinity();
  std::optional<FixedPointKind> nearest;
  for (const auto& fp : fixed_points(p)) {
    if (!fp.exists || fp.singular) continue;
    const double d = scaled(fp.state);
    if (d < best) {
      best = d;
      nearest = fp.kind;
    }
  }
  if (distance_out) *distance_out = best;
  if (!nearest || best > opt.convergence_tol) return std::nullopt;
  if (*nearest == FixedPointKind::unsustainable_domestic) return RegimeKind::unsustainable;
  return p.delta * end[0] > p.gamma ? RegimeKind::sustainable_net_exporter
                                    : RegimeKind::sustainable_net_importer;
}

// Cells ordered beta-major, then alpha, then kappa; the order does not depend on threads.
inline std::vector<RegimeCell> regime_map(const RegimeGrid& grid, const RegimeMapOptions& opt = {}) {
  const auto kappas = linspace(grid.kappa_min, grid.kappa_max, grid.kappa_steps);
  const auto alphas = linspace(grid.alpha_min, grid.alpha_max, grid.alpha_steps);
  for (double k : kappas)
    if (!(k > 0.0 && k < 1.0)) throw domain_error("kappa range must lie inside (0, 1)");
  for (double a : alphas)
    if (!(a > 0.0)) throw domain_error("alpha range must be positive");

  std::vector<RegimeCell> cells;
  cells.reserve(grid.betas.size() * kappas.size() * alphas.size());
  for (double beta : grid.betas)
    for (double alpha : alphas)
      for (double kappa : kappas) {
        DimensionlessParams p{alpha, beta, grid.delta, grid.omega, grid.gamma, kappa, grid.mu, grid.rho};
        validate(p);
        cells.push_back({kappa, alpha, beta, classify_regime(p, opt.boundary_band), {}, {}, 0.0});
      }

  if (opt.verify_by_simulation) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        auto& c = cells[i];
        DimensionlessParams p{c.alpha, c.beta, grid.delta, grid.omega, grid.gamma, c.kappa, grid.mu, grid.rho};
        c.simulated = simulate_attractor(p, opt, &c.attractor_distance);
        c.agreement = c.simulated.has_value() && *c.simulated == c.regime.kind;
      }
    };
    const unsigned n = std::max(1u, opt.threads);
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
  }
  return cells;
}

struct SensitivityPoint {
  double multiplier;
  double critical_ratio;
};

// Reference values for the critical-ratio sensitivity curves. f, g, h, m and r do not
// enter the ratio.
inline DimensionalParams sensitivity_reference() {
  DimensionalParams p;
  p.q = 160.0;
  p.b = 140.0;
  p.e = 0.033;
  p.a = 0.2;
  p.w = 0.33;
  p.s = 1.0;
  p.k = 0.5;
  p.f = p.g = p.h = p.m = p.r = 1.0;
  return p;
}

inline std::vector<SensitivityPoint> sensitivity_curve(const DimensionalParams& reference,
                                                       const std::vector<double>& multipliers,
                                                       const std::string& which) {
  double DimensionalParams::*field = nullptr;
  if (which == "q") field = &DimensionalParams::q;
  else if (which == "b") field = &DimensionalParams::b;
  else if (which == "e") field = &DimensionalParams::e;
  else if (which == "a") field = &DimensionalParams::a;
  else if (which == "w") field = &DimensionalParams::w;
  else if (which == "s") field = &DimensionalParams::s;
  else if (which == "k") field = &DimensionalParams::k;
  else throw usage_error("sensitivity parameter must be one of q, b, e, a, w, s, k");

  std::vector<SensitivityPoint> out;
  out.reserve(multipliers.size());
  for (double mult : multipliers) {
    if (!std::isfinite(mult) || mult <= 0.0) throw domain_error("sensitivity multipliers must be > 0");
    DimensionalParams p = reference;
    p.*field *= mult;
    out.push_back({mult, critical_ratio(p)});
  }
  return out;
}

} // namespace foodsys
