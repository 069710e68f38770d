#pragma once

// Posterior summaries and convergence diagnostics for scalar MCMC output.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "foodsys/errors.hpp"

namespace foodsys {

using Chains = std::vector<std::vector<double>>;  // [chain][draw]

inline double mean(std::span<const double> x) {
  if (x.empty()) throw usage_error("mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
  if (x.size() < 2) throw usage_error("variance needs at least two values");
  const double mu = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - mu) * (v - mu);
  return ss / static_cast<double>(x.size() - 1);
}

inline std::vector<double> pooled(const Chains& chains) {
  std::vector<double> out;
  for (const auto& c : chains) out.insert(out.end(), c.begin(), c.end());
  return out;
}

// Linear interpolation between order statistics (R type 7).
inline double quantile(std::vector<double> x, double prob) {
  if (x.empty()) throw usage_error("quantile of empty sample");
  std::sort(x.begin(), x.end());
  const double pos = prob * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

struct Interval {
  double lower;
  double upper;
};

// Shortest window of ceil(mass * n) sorted samples; ties resolve to the lowest start.
inline Interval hdi(std::vector<double> samples, double mass = 0.95) {
  if (samples.size() < 20) throw usage_error("hdi needs at least 20 samples");
  if (!(mass > 0.0 && mass <= 1.0)) throw usage_error("hdi mass must lie in (0, 1]");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  const auto width = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9)));
  std::size_t best = 0;
  double best_width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + width - 1 < n; ++i) {
    const double w = samples[i + width - 1] - samples[i];
    if (w < best_width) {
      best_width = w;
      best = i;
    }
  }
  return {samples[best], samples[best + width - 1]};
}

struct DiagnosticValue {
  double value;
  bool degenerate = false;  // zero variance: R-hat is +inf, ESS is 0
};

// Split R-hat: every chain is halved (a middle draw is dropped for odd lengths) and the
// between/within variance ratio is taken over the half-chains.
inline DiagnosticValue rhat(const Chains& chains) {
  if (chains.size() < 2) throw usage_error("rhat needs at least two chains");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains)
    if (c.size() != n) throw usage_error("rhat needs chains of equal length");
  if (n < 4) throw usage_error("rhat needs at least four draws per chain");

  const std::size_t half = n / 2;
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    const std::span<const double> s(c);
    for (auto part : {s.subspan(0, half), s.subspan(n - half, half)}) {
      means.push_back(mean(part));
      vars.push_back(variance(part));
    }
  }
  const double W = mean(vars);
  if (!(W > 0.0)) return {std::numeric_limits<double>::infinity(), true};
  const double nh = static_cast<double>(half);
  const double B = nh * variance(means);
  const double var_plus = (nh - 1.0) / nh * W + B / nh;
  return {std::sqrt(var_plus / W), false};
}

// Autocorrelation-time ESS for a single chain, truncating the autocorrelation sum with
// Geyer's initial positive sequence.
inline DiagnosticValue ess(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 8) throw usage_error("ess needs at least eight draws");
  const double mu = mean(x);
  double c0 = 0.0;
  for (double v : x) c0 += (v - mu) * (v - mu);
  c0 /= static_cast<double>(n);
  if (!(c0 > 0.0)) return {0.0, true};

  auto rho = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += (x[i] - mu) * (x[i + lag] - mu);
    return acc / static_cast<double>(n) / c0;
  };
  double tau = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return {static_cast<double>(n) / tau, false};
}

// Sum of per-chain ESS.
inline DiagnosticValue ess(const Chains& chains) {
  DiagnosticValue total{0.0, true};
  for (const auto& c : chains) {
    const auto e = ess(std::span<const double>(c));
    total.value += e.value;
    total.degenerate = total.degenerate && e.degenerate;
  }
  return total;
}

struct ScalarSummary {
  double mean;
  double sd;
  Interval hdi95;
  double ess;
  double rhat;
  bool flagged;  // zero variance in some diagnostic
};

inline ScalarSummary summarise(const Chains& chains, double mass = 0.95) {
  const auto all = pooled(chains);
  ScalarSummary s;
  s.mean = mean(all);
  s.sd = std::sqrt(variance(all));
  s.hdi95 = hdi(all, mass);
  const auto e = ess(chains);
  s.ess = e.value;
  const auto r = chains.size() >= 2 ? rhat(chains) : DiagnosticValue{std::numeric_limits<double>::quiet_NaN(), false};
  s.rhat = r.value;
  s.flagged = e.degenerate || r.degenerate;
  return s;
}

} // namespace foodsys
