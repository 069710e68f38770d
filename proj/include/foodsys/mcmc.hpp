#pragma once

// Adaptive random-walk Metropolis over an arbitrary log density on R^d.
//
// Warmup adapts a global proposal scale by Robbins-Monro towards the target acceptance
// rate and re-estimates the proposal covariance at the end of doubling windows. Both are
// frozen when warmup ends, so the sampling phase is a plain Metropolis chain. One
// iteration consists of `steps_per_iteration` proposals; the state is recorded once
// per iteration.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "foodsys/errors.hpp"

namespace foodsys {

struct SamplerSettings {
  std::size_t n_chains = 4;
  std::size_t warmup = 2500;
  std::size_t draws = 2500;
  std::size_t steps_per_iteration = 0;  // 0: four proposals per dimension
  std::uint64_t seed = 1;
  double target_accept = 0.234;
  double initial_sd = 0.1;   // proposal sd per coordinate before the first covariance window
  double init_radius = 0.5;  // chains start at centre + N(0, init_radius^2)
  unsigned threads = 1;
};

struct ChainOutput {
  std::vector<std::vector<double>> draws;  // [iteration][dim]
  std::vector<double> log_density;
  double warmup_acceptance = 0.0;
  double acceptance = 0.0;  // post-warmup proposals accepted
  double final_scale = 0.0;
  std::uint64_t seed = 0;
};

using Rng = std::mt19937_64;

// Independent, scheduling-free stream per chain.
inline Rng chain_rng(std::uint64_t seed, std::size_t chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x5eedu};
  return Rng(seq);
}

namespace detail {

// Ends of the covariance windows inside warmup: a fast initial buffer, windows that
// double in length, and a terminal buffer in which only the scale adapts.
inline std::vector<std::size_t> covariance_window_ends(std::size_t warmup) {
  constexpr std::size_t init_buffer = 75, term_buffer = 50, base_window = 25;
  std::vector<std::size_t> ends;
  if (warmup < init_buffer + term_buffer + base_window) return ends;
  std::size_t start = init_buffer, len = base_window;
  const std::size_t last = warmup - term_buffer;
  while (start + len <= last) {
    std::size_t end = start + len;
    if (end + 2 * len > last) end = last;  // stretch the final window
    ends.push_back(end);
    start = end;
    len *= 2;
  }
  return ends;
}

template <class LogDensity>
ChainOutput run_chain(LogDensity& log_density, std::span<const double> centre, const SamplerSettings& s,
                      std::size_t chain_index) {
  const auto d = static_cast<Eigen::Index>(centre.size());
  const std::size_t steps = s.steps_per_iteration ? s.steps_per_iteration : 4 * centre.size();
  Rng rng = chain_rng(s.seed, chain_index);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::VectorXd x(d), prop(d);
  double lp = -std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 200 && !std::isfinite(lp); ++attempt) {
    const double radius = attempt < 100 ? s.init_radius : 0.0;
    for (Eigen::Index i = 0; i < d; ++i) x(i) = centre[static_cast<std::size_t>(i)] + radius * normal(rng);
    lp = log_density(std::span<const double>(x.data(), static_cast<std::size_t>(d)));
  }
  if (!std::isfinite(lp)) throw sampler_error("no initial point with finite log density");

  Eigen::MatrixXd chol = Eigen::MatrixXd::Identity(d, d);
  double log_scale = std::log(s.initial_sd);
  std::size_t rm_step = 0;
  const auto window_ends = covariance_window_ends(s.warmup);
  std::size_t next_window = 0, window_start = std::min<std::size_t>(75, s.warmup);
  std::vector<Eigen::VectorXd> window;

  ChainOutput out;
  out.seed = s.seed;
  out.draws.reserve(s.draws);
  out.log_density.reserve(s.draws);
  std::size_t warm_acc = 0, warm_total = 0, acc = 0, total = 0;
  Eigen::VectorXd z(d);

  for (std::size_t it = 0; it < s.warmup + s.draws; ++it) {
    const bool warming = it < s.warmup;
    for (std::size_t st = 0; st < steps; ++st) {
      for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(rng);
      prop = x + std::exp(log_scale) * (chol * z);
      const double lp_prop = log_density(std::span<const double>(prop.data(), static_cast<std::size_t>(d)));
      const double log_ratio = lp_prop - lp;
      const double accept_prob = std::isfinite(lp_prop) ? std::min(1.0, std::exp(std::min(0.0, log_ratio))) : 0.0;
      const bool accepted = unif(rng) < accept_prob;
      if (accepted) {
        x = prop;
        lp = lp_prop;
      }
      if (warming) {
        ++warm_total;
        warm_acc += accepted;
        ++rm_step;
        log_scale += std::pow(static_cast<double>(rm_step), -0.6) * (accept_prob - s.target_accept);
        log_scale = std::clamp(log_scale, -30.0, 10.0);
      } else {
        ++total;
        acc += accepted;
      }
    }
    if (warming) {
      if (it >= window_start) window.push_back(x);
      if (next_window < window_ends.size() && it + 1 == window_ends[next_window]) {
        const auto n = static_cast<double>(window.size());
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
        for (const auto& w : window) mu += w;
        mu /= n;
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
        for (const auto& w : window) cov += (w - mu) * (w - mu).transpose();
        cov /= std::max(1.0, n - 1.0);
        // Shrink towards a small diagonal, as in Stan's metric adaptation.
        cov = (n / (n + 5.0)) * cov + 1e-3 * (5.0 / (n + 5.0)) * Eigen::MatrixXd::Identity(d, d);
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) {
          chol = llt.matrixL();
          log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));
          rm_step = 0;
        }
        window.clear();
        window_start = it + 1;
        ++next_window;
      }
    } else {
      out.draws.emplace_back(x.data(), x.data() + d);
      out.log_density.push_back(lp);
    }
  }
  out.warmup_acceptance = warm_total ? static_cast<double>(warm_acc) / static_cast<double>(warm_total) : 0.0;
  out.acceptance = total ? static_cast<double>(acc) / static_cast<double>(total) : 0.0;
  out.final_scale = std::exp(log_scale);
  return out;
}

} // namespace detail

// Runs n_chains chains on up to `threads` workers. log_density must be safe to call
// concurrently; it may return -inf to reject a point. The result does not depend on the
// number of threads.
template <class LogDensity>
std::vector<ChainOutput> adaptive_metropolis(LogDensity&& log_density, std::span<const double> centre,
                                             const SamplerSettings& settings) {
  if (centre.empty()) throw usage_error("sampler needs at least one dimension");
  if (settings.n_chains < 1 || settings.draws < 1) throw usage_error("sampler needs chains and draws");
  std::vector<ChainOutput> chains(settings.n_chains);
  std::vector<std::exception_ptr> errors(settings.n_chains);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < settings.n_chains; c = next++) {
      try {
        chains[c] = detail::run_chain(log_density, centre, settings, c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(settings.threads, static_cast<unsigned>(settings.n_chains)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const bool all_stuck = std::all_of(chains.begin(), chains.end(), [](const ChainOutput& c) { return c.acceptance < 0.01; });
  if (all_stuck) {
    std::string msg = "all chains stuck after warmup; acceptance rates:";
    for (const auto& c : chains) msg += " " + std::to_string(c.acceptance);
    throw sampler_error(msg);
  }
  return chains;
}

} // namespace foodsys
