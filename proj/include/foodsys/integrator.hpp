#pragma once

// Adaptive Dormand-Prince 5(4) initial value solver. Steps are shortened so the
// solution lands exactly on every requested output time.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "foodsys/errors.hpp"

namespace foodsys {

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double initial_step = 0.0;  // 0: use 1% of the span
  std::size_t max_steps = 1'000'000;
  double min_step = 1e-12;
  // Reject steps that produce a negative component (at any stage or at the step end).
  bool require_nonnegative = false;
};

template <std::size_t N>
struct Solution {
  std::vector<double> times;
  std::vector<std::array<double, N>> states;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

template <std::size_t N>
struct EventResult {
  bool reached = false;  // false: time cap hit before the predicate held
  double time = 0.0;
  std::array<double, N> state{};
};

namespace dopri {

inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                        b6 = 11.0 / 84;
// Difference between the 5th and embedded 4th order weights.
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

inline constexpr double safety = 0.9;
inline constexpr double min_factor = 0.2;
inline constexpr double max_factor = 5.0;

template <std::size_t N>
bool all_finite(const std::array<double, N>& y) {
  return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

template <std::size_t N>
bool all_nonnegative(const std::array<double, N>& y) {
  return std::all_of(y.begin(), y.end(), [](double v) { return v >= 0.0; });
}

// Stepper state shared by integrate() and event_horizon().
template <std::size_t N, class Rhs>
class Stepper {
public:
  using State = std::array<double, N>;

  Stepper(Rhs& rhs, const State& y0, double t0, double span, const IntegratorConfig& cfg)
      : rhs_(rhs), cfg_(cfg), t_(t0), y_(y0) {
    if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0))
      throw usage_error("integrator tolerances must be positive");
    if (cfg.max_steps < 1) throw usage_error("max_steps must be >= 1");
    if (cfg.require_nonnegative && !all_nonnegative(y0))
      throw integration_error("initial state has a negative component", t0);
    h_ = cfg.initial_step > 0.0 ? cfg.initial_step : 0.01 * span;
    if (!try_eval(t_, y_, k1_)) throw integration_error("vector field undefined at initial state", t0);
  }

  double time() const { return t_; }
  const State& state() const { return y_; }
  std::size_t accepted() const { return accepted_; }
  std::size_t rejected() const { return rejected_; }

  // Advances by one accepted step that ends no later than `target`; returns true if
  // the step landed on `target` exactly.
  bool step_towards(double target) {
    for (;;) {
      if (accepted_ + rejected_ >= cfg_.max_steps)
        throw nonconvergence_error("integrator exceeded max_steps", accepted_ + rejected_);
      const double remaining = target - t_;
      const bool clipped = h_ >= remaining;
      const double h = clipped ? remaining : h_;

      State y5, err;
      bool ok = attempt(h, y5, err);
      double err_norm = 0.0;
      if (ok) {
        for (std::size_t i = 0; i < N; ++i) {
          const double scale = cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y_[i]), std::abs(y5[i]));
          err_norm = std::max(err_norm, std::abs(err[i]) / scale);
        }
        ok = std::isfinite(err_norm);
      }
      if (!ok) {
        ++rejected_;
        h_ = 0.25 * h;
        if (h_ < cfg_.min_step) throw integration_error("step size underflow after rejected step", t_);
        continue;
      }
      if (err_norm <= 1.0) {
        ++accepted_;
        t_ = clipped ? target : t_ + h;
        y_ = y5;
        k1_ = k7_;
        const double factor =
            err_norm == 0.0 ? max_factor
                            : std::clamp(safety * std::pow(err_norm, -0.2), min_factor, max_factor);
        // A step shortened to hit an output time says little about the natural step size.
        h_ = clipped ? std::max(h_, h * factor) : h * factor;
        return clipped;
      }
      ++rejected_;
      h_ = h * std::max(min_factor, safety * std::pow(err_norm, -0.2));
      if (h_ < cfg_.min_step) throw integration_error("step size underflow", t_);
    }
  }

private:
  bool try_eval(double t, const State& y, State& out) {
    if (cfg_.require_nonnegative && !all_nonnegative(y)) return false;
    try {
      out = rhs_(t, y);
    } catch (const singularity_error&) {
      return false;
    }
    return all_finite(out);
  }

  bool attempt(double h, State& y5, State& err) {
    State tmp, k2, k3, k4, k5, k6;
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y_[i] + h * a21 * k1_[i];
    if (!try_eval(t_ + c2 * h, tmp, k2)) return false;
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2[i]);
    if (!try_eval(t_ + c3 * h, tmp, k3)) return false;
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2[i] + a43 * k3[i]);
    if (!try_eval(t_ + c4 * h, tmp, k4)) return false;
    for (std::size_t i = 0; i < N; ++i)
      tmp[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    if (!try_eval(t_ + c5 * h, tmp, k5)) return false;
    for (std::size_t i = 0; i < N; ++i)
      tmp[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    if (!try_eval(t_ + h, tmp, k6)) return false;
    for (std::size_t i = 0; i < N; ++i)
      y5[i] = y_[i] + h * (b1 * k1_[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    if (!try_eval(t_ + h, y5, k7_)) return false;
    for (std::size_t i = 0; i < N; ++i)
      err[i] = h * (e1 * k1_[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7_[i]);
    return true;
  }

  Rhs& rhs_;
  const IntegratorConfig& cfg_;
  double t_;
  State y_;
  State k1_{}, k7_{};
  double h_ = 0.0;
  std::size_t accepted_ = 0;
  std::size_t rejected_ = 0;
};

} // namespace dopri

// Integrates dy/dt = rhs(t, y) from t0 to t1 and returns the states at obs_times,
// which must be sorted and lie within [t0, t1]. Repeated times are each reported.
template <std::size_t N, class Rhs>
Solution<N> integrate(Rhs&& rhs, const std::array<double, N>& y0, double t0, double t1,
                      std::span<const double> obs_times, const IntegratorConfig& cfg = {}) {
  if (!(t0 < t1)) throw usage_error("integrate requires t0 < t1");
  if (!std::is_sorted(obs_times.begin(), obs_times.end()))
    throw usage_error("observation times must be sorted");
  if (!obs_times.empty() && (obs_times.front() < t0 || obs_times.back() > t1))
    throw usage_error("observation times must lie within [t0, t1]");

  dopri::Stepper<N, std::remove_reference_t<Rhs>> stepper(rhs, y0, t0, t1 - t0, cfg);
  Solution<N> out;
  out.times.reserve(obs_times.size());
  out.states.reserve(obs_times.size());

  std::size_t next = 0;
  auto emit_ready = [&] {
    while (next < obs_times.size() && obs_times[next] == stepper.time()) {
      out.times.push_back(obs_times[next]);
      out.states.push_back(stepper.state());
      ++next;
    }
  };
  emit_ready();
  while (stepper.time() < t1) {
    const double target = next < obs_times.size() ? obs_times[next] : t1;
    stepper.step_towards(target);
    emit_ready();
  }
  out.accepted_steps = stepper.accepted();
  out.rejected_steps = stepper.rejected();
  return out;
}

// Integrates until predicate(state) first holds at the end of an accepted step, or
// until t_cap. A predicate that holds at y0 returns (t0, y0).
template <std::size_t N, class Rhs, class Predicate>
EventResult<N> event_horizon(Rhs&& rhs, const std::array<double, N>& y0, double t0, double t_cap,
                             const IntegratorConfig& cfg, Predicate&& predicate) {
  if (predicate(y0)) return {true, t0, y0};
  if (!(t0 < t_cap)) throw usage_error("event_horizon requires t0 < t_cap");
  dopri::Stepper<N, std::remove_reference_t<Rhs>> stepper(rhs, y0, t0, t_cap - t0, cfg);
  while (stepper.time() < t_cap) {
    stepper.step_towards(t_cap);
    if (predicate(stepper.state())) return {true, stepper.time(), stepper.state()};
  }
  return {false, stepper.time(), stepper.state()};
}

} // namespace foodsys
