#pragma once

// Bayesian fitting of the dimensional model to partially observed monthly series.
//
// Every observed value is lognormal around its model counterpart:
//   herd          ~ LN(ln C, sigma_herd)
//   new_supplies  ~ LN(ln(f g C + k (h - f g C)), sigma_supplies)   (or ln I, see SuppliesTarget)
//   price         ~ LN(ln P, sigma_price)
//   production    ~ LN(ln(f g C), eps_production)
//   imports       ~ LN(ln(k h), eps_imports)
//   exports       ~ LN(ln(k f g C), eps_exports)
// Missing cells contribute nothing. Sampled quantities live on an unconstrained scale
// (log(value / scale), logit for k) with standard normal priors; b and g stay fixed.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "foodsys/data.hpp"
#include "foodsys/diagnostics.hpp"
#include "foodsys/errors.hpp"
#include "foodsys/integrator.hpp"
#include "foodsys/mcmc.hpp"
#include "foodsys/model.hpp"
#include "foodsys/simulate.hpp"
#include "foodsys/stability.hpp"

namespace foodsys {

struct ObservationNoise {
  double herd = 0.1;
  double supplies = 0.1;
  double price = 0.1;
  double production = 0.1;
  double imports = 0.1;
  double exports = 0.1;

  double operator[](SeriesId id) const {
    switch (id) {
      case SeriesId::herd: return herd;
      case SeriesId::new_supplies: return supplies;
      case SeriesId::price: return price;
      case SeriesId::production: return production;
      case SeriesId::imports: return imports;
      case SeriesId::exports: return exports;
    }
    return 0.0;
  }
  friend bool operator==(const ObservationNoise&, const ObservationNoise&) = default;
};

struct ModelDraw {
  DimensionalParams params;
  InitialState init;
  ObservationNoise noise;
};

enum class SuppliesTarget { inflow, state };

inline const char* to_string(SuppliesTarget t) { return t == SuppliesTarget::inflow ? "inflow" : "state"; }

// Layout of the sampled vector.
inline constexpr std::size_t n_sampled = 20;
inline constexpr std::array<const char*, n_sampled> sampled_names{
    "a",  "e",  "f",  "k",  "h",  "w",  "s",  "m",  "q",  "r",  "C0", "I0", "D0", "P0",
    "sigma_herd", "sigma_supplies", "sigma_price", "eps_production", "eps_imports", "eps_exports"};
inline constexpr std::size_t index_k = 3;

struct TransformSpec {
  // Divisors of the log transform, indexed like sampled_names; the entry for k is unused.
  std::array<double, n_sampled> scales{0.01, 0.001, 2.0, 1.0, 2e8, 0.2, 1.0, 0.1, 100.0, 0.1,
                                       4e5,  1e8,   2e8, 100.0, 0.1, 0.1, 0.1, 0.1,  0.1,  0.1};
  double b = 138.3;  // cost of capital production [p/kg], not sampled
  double g = 82.4;   // kg per pig, not sampled

  std::array<double, n_sampled> natural(const ModelDraw& m) const {
    const auto& p = m.params;
    const auto& n = m.noise;
    return {p.a, p.e, p.f, p.k, p.h, p.w, p.s, p.m, p.q, p.r, m.init.C0, m.init.I0, m.init.D0, m.init.P0,
            n.herd, n.supplies, n.price, n.production, n.imports, n.exports};
  }

  ModelDraw from_natural(std::span<const double> v) const {
    if (v.size() != n_sampled) throw usage_error("expected " + std::to_string(n_sampled) + " values");
    ModelDraw m;
    auto& p = m.params;
    p.a = v[0], p.e = v[1], p.f = v[2], p.k = v[3], p.h = v[4], p.w = v[5], p.s = v[6], p.m = v[7], p.q = v[8],
    p.r = v[9];
    p.b = b;
    p.g = g;
    m.init = {v[10], v[11], v[12], v[13]};
    m.noise = {v[14], v[15], v[16], v[17], v[18], v[19]};
    return m;
  }

  std::vector<double> to_unconstrained(const ModelDraw& m) const {
    const auto nat = natural(m);
    std::vector<double> theta(n_sampled);
    for (std::size_t i = 0; i < n_sampled; ++i) {
      if (i == index_k) {
        if (!(nat[i] > 0.0 && nat[i] < 1.0)) throw domain_error("k must lie in (0, 1)");
        theta[i] = std::log(nat[i] / (1.0 - nat[i]));
      } else {
        if (!(nat[i] > 0.0) || !std::isfinite(nat[i]))
          throw domain_error(std::string("'") + sampled_names[i] + "' must be finite and > 0");
        theta[i] = std::log(nat[i] / scales[i]);
      }
    }
    return theta;
  }

  ModelDraw from_unconstrained(std::span<const double> theta) const {
    if (theta.size() != n_sampled) throw usage_error("expected " + std::to_string(n_sampled) + " values");
    std::array<double, n_sampled> nat;
    for (std::size_t i = 0; i < n_sampled; ++i)
      nat[i] = i == index_k ? 1.0 / (1.0 + std::exp(-theta[i])) : scales[i] * std::exp(theta[i]);
    return from_natural(nat);
  }
};

inline double lognormal_log_density(double y, double median, double sigma) {
  const double z = (std::log(y) - std::log(median)) / sigma;
  return -std::log(y * sigma * std::sqrt(2.0 * std::numbers::pi)) - 0.5 * z * z;
}

// Model counterpart of an observed series at dimensional state c.
inline double model_observable(SeriesId id, const Vec4& c, const DimensionalParams& p, SuppliesTarget target) {
  const auto fl = flows(c[0], p);
  switch (id) {
    case SeriesId::herd: return c[0];
    case SeriesId::new_supplies: return target == SuppliesTarget::inflow ? fl.inflow : c[1];
    case SeriesId::price: return c[3];
    case SeriesId::production: return fl.production;
    case SeriesId::imports: return fl.imports;
    case SeriesId::exports: return fl.exports;
  }
  return 0.0;
}

// Dimensional states at months 0..n-1.
inline std::vector<Vec4> monthly_states(const DimensionalParams& p, const InitialState& init, std::size_t months,
                                        const IntegratorConfig& cfg) {
  if (months == 0) return {};
  if (months == 1) return {init.as_vector()};
  std::vector<double> times(months);
  for (std::size_t i = 0; i < months; ++i) times[i] = static_cast<double>(i);
  return simulate_dimensional(p, init, times, cfg).states;
}

struct LikelihoodTerms {
  std::array<double, 6> per_series{};  // indexed like all_series
  bool ok = true;                      // false: the model could not be evaluated

  double total() const {
    if (!ok) return -std::numeric_limits<double>::infinity();
    double t = 0.0;
    for (double v : per_series) t += v;
    return t;
  }
};

inline IntegratorConfig likelihood_integrator_config() {
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-8;
  cfg.abs_tol = 1e-10;
  cfg.max_steps = 100'000;
  return model_integrator_config(cfg);
}

inline LikelihoodTerms log_likelihood_terms(const DimensionalParams& p, const InitialState& init,
                                            const ObservationNoise& noise, const Dataset& data,
                                            const IntegratorConfig& cfg = likelihood_integrator_config(),
                                            SuppliesTarget target = SuppliesTarget::inflow) {
  if (data.total_observed() == 0) throw usage_error("dataset has no observed values");
  // Only integrate as far as the last observed month.
  std::size_t horizon = 0;
  for (SeriesId id : all_series) {
    const auto& s = data.series(id);
    for (std::size_t i = s.size(); i-- > 0;)
      if (s[i]) {
        horizon = std::max(horizon, i + 1);
        break;
      }
  }
  LikelihoodTerms terms;
  std::vector<Vec4> states;
  try {
    states = monthly_states(p, init, horizon, cfg);
  } catch (const std::runtime_error&) {
    terms.ok = false;
    return terms;
  }
  for (std::size_t j = 0; j < all_series.size(); ++j) {
    const SeriesId id = all_series[j];
    const auto& s = data.series(id);
    const double sigma = noise[id];
    double acc = 0.0;
    for (std::size_t i = 0; i < horizon && i < s.size(); ++i) {
      if (!s[i]) continue;
      const double z = model_observable(id, states[i], p, target);
      if (!(z > 0.0) || !std::isfinite(z)) {
        terms.ok = false;
        return terms;
      }
      acc += lognormal_log_density(*s[i], z, sigma);
    }
    terms.per_series[j] = acc;
  }
  return terms;
}

inline double log_likelihood(const DimensionalParams& p, const InitialState& init, const ObservationNoise& noise,
                             const Dataset& data, const IntegratorConfig& cfg = likelihood_integrator_config(),
                             SuppliesTarget target = SuppliesTarget::inflow) {
  return log_likelihood_terms(p, init, noise, data, cfg, target).total();
}

inline double log_prior(std::span<const double> theta) {
  const double c = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (double t : theta) lp += -0.5 * t * t - c;
  return lp;
}

struct McmcConfig {
  SamplerSettings sampler;
  TransformSpec transform;
  SuppliesTarget supplies_target = SuppliesTarget::inflow;
  IntegratorConfig integrator = likelihood_integrator_config();
};

struct PosteriorChains {
  TransformSpec transform;
  std::vector<std::vector<std::vector<double>>> theta;  // [chain][draw][parameter], unconstrained
  std::vector<std::vector<double>> log_posterior;       // [chain][draw]
  std::vector<double> acceptance;
  std::vector<double> warmup_acceptance;
  std::uint64_t seed = 0;
  std::size_t integration_failures = 0;

  std::size_t n_chains() const { return theta.size(); }
  std::size_t n_draws() const { return theta.empty() ? 0 : theta.front().size(); }

  ModelDraw draw(std::size_t chain, std::size_t i) const { return transform.from_unconstrained(theta[chain][i]); }

  // Natural-scale chains of a scalar function of the draw.
  template <class F>
  Chains map(F&& f) const {
    Chains out(n_chains());
    for (std::size_t c = 0; c < n_chains(); ++c) {
      out[c].reserve(n_draws());
      for (std::size_t i = 0; i < n_draws(); ++i) out[c].push_back(f(draw(c, i)));
    }
    return out;
  }

  Chains natural(std::size_t index) const {
    return map([&](const ModelDraw& m) { return transform.natural(m)[index]; });
  }
};

class LogPosterior {
public:
  LogPosterior(const Dataset& data, const McmcConfig& cfg) : data_(data), cfg_(cfg) {}

  double operator()(std::span<const double> theta) const {
    const double prior = log_prior(theta);
    const ModelDraw m = cfg_.transform.from_unconstrained(theta);
    for (double v : cfg_.transform.natural(m))
      if (!std::isfinite(v) || v <= 0.0) return -std::numeric_limits<double>::infinity();
    if (!(m.params.k < 1.0)) return -std::numeric_limits<double>::infinity();
    const auto terms = log_likelihood_terms(m.params, m.init, m.noise, data_, cfg_.integrator, cfg_.supplies_target);
    if (!terms.ok) {
      ++failures_;
      return -std::numeric_limits<double>::infinity();
    }
    return prior + terms.total();
  }

  std::size_t failures() const { return failures_.load(); }

private:
  const Dataset& data_;
  const McmcConfig& cfg_;
  mutable std::atomic<std::size_t> failures_{0};
};

inline void require_fit_ready(const Dataset& data) {
  const auto rep = validate(data);
  if (rep.fatal()) {
    std::string msg = "dataset cannot be fitted:";
    for (const auto& f : rep.findings)
      if (f.severity == Severity::fatal) msg += " [" + f.series + "] " + f.message + ";";
    throw domain_error(msg);
  }
}

// Coordinates the sampler moves in: the unconstrained vector with log q, log I0 and
// log D0 sheared by log(1 + 2 w s). Near equilibrium the inventory balance fixes
// q (w s + 1/2), and demand and inventory scale with q, so in these coordinates the
// curved ridges become straight. The shear has unit Jacobian, so densities carry over
// unchanged.
inline constexpr std::size_t index_w = 5, index_s = 6, index_q = 8, index_I0 = 11, index_D0 = 12;
inline constexpr std::array<std::size_t, 3> sheared_indices{index_q, index_I0, index_D0};

inline double ridge_shear(const TransformSpec& t, std::span<const double> v) {
  const double w = t.scales[index_w] * std::exp(v[index_w]);
  const double s = t.scales[index_s] * std::exp(v[index_s]);
  return std::log1p(2.0 * w * s);
}

inline std::vector<double> to_sampler_coordinates(const TransformSpec& t, std::span<const double> theta) {
  std::vector<double> phi(theta.begin(), theta.end());
  const double shift = ridge_shear(t, theta);
  for (std::size_t i : sheared_indices) phi[i] += shift;
  return phi;
}

inline std::vector<double> from_sampler_coordinates(const TransformSpec& t, std::span<const double> phi) {
  std::vector<double> theta(phi.begin(), phi.end());
  const double shift = ridge_shear(t, phi);
  for (std::size_t i : sheared_indices) theta[i] -= shift;
  return theta;
}

inline PosteriorChains sample_posterior(const Dataset& data, const McmcConfig& cfg) {
  require_fit_ready(data);
  LogPosterior target(data, cfg);
  auto sheared = [&](std::span<const double> phi) { return target(from_sampler_coordinates(cfg.transform, phi)); };
  const std::vector<double> zero(n_sampled, 0.0);
  auto outputs = adaptive_metropolis(sheared, to_sampler_coordinates(cfg.transform, zero), cfg.sampler);
  for (auto& o : outputs)
    for (auto& d : o.draws) d = from_sampler_coordinates(cfg.transform, d);
  PosteriorChains pc;
  pc.transform = cfg.transform;
  pc.seed = cfg.sampler.seed;
  pc.integration_failures = target.failures();
  for (const auto& o : outputs) {
    pc.theta.push_back(o.draws);
    pc.log_posterior.push_back(o.log_density);
    pc.acceptance.push_back(o.acceptance);
    pc.warmup_acceptance.push_back(o.warmup_acceptance);
  }
  return pc;
}

struct NamedSummary {
  std::string name;
  ScalarSummary summary;
};

using PosteriorSummary = std::vector<NamedSummary>;

inline PosteriorSummary parameter_summaries(const PosteriorChains& pc) {
  PosteriorSummary out;
  for (std::size_t i = 0; i < n_sampled; ++i) out.push_back({sampled_names[i], summarise(pc.natural(i))});
  return out;
}

struct DerivedQuantities {
  double critical_ratio;
  double surplus_ratio;
  double critical_kappa;
  double alpha_minus_surplus;
  double surplus_minus_one;
};

inline DerivedQuantities derived_quantities(const DimensionalParams& p) {
  const double surplus = surplus_ratio(p);
  return {critical_ratio(p), surplus, surplus, p.q / p.b - surplus, surplus - 1.0};
}

// Derived quantities are evaluated per draw and then summarised.
inline PosteriorSummary derived_posteriors(const PosteriorChains& pc) {
  PosteriorSummary out;
  out.push_back({"critical_ratio", summarise(pc.map([](const ModelDraw& m) { return derived_quantities(m.params).critical_ratio; }))});
  out.push_back({"surplus_ratio", summarise(pc.map([](const ModelDraw& m) { return derived_quantities(m.params).surplus_ratio; }))});
  out.push_back({"critical_kappa", summarise(pc.map([](const ModelDraw& m) { return derived_quantities(m.params).critical_kappa; }))});
  out.push_back({"alpha_minus_surplus", summarise(pc.map([](const ModelDraw& m) { return derived_quantities(m.params).alpha_minus_surplus; }))});
  out.push_back({"surplus_minus_one", summarise(pc.map([](const ModelDraw& m) { return derived_quantities(m.params).surplus_minus_one; }))});
  return out;
}

inline const ScalarSummary& find_summary(const PosteriorSummary& s, const std::string& name) {
  for (const auto& n : s)
    if (n.name == name) return n.summary;
  throw usage_error("no summary named '" + name + "'");
}

// Noise-perturbed pseudo-observations for the observed cells of `mask` (all cells when
// `all_cells`), plus the noise-free model value for every month and series.
struct PredictiveDraw {
  std::size_t chain;
  std::size_t iteration;
  Dataset observations;
  Dataset latent;
};

struct PredictiveEnsemble {
  std::vector<PredictiveDraw> draws;
  std::size_t requested = 0;
  std::size_t skipped = 0;  // draws whose integration failed
};

inline std::optional<PredictiveDraw> predictive_draw(const ModelDraw& m, const Dataset& mask, Rng& rng,
                                                     SuppliesTarget target, const IntegratorConfig& cfg,
                                                     bool all_cells = false) {
  std::vector<Vec4> states;
  try {
    states = monthly_states(m.params, m.init, mask.months(), cfg);
  } catch (const std::runtime_error&) {
    return std::nullopt;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  PredictiveDraw d{0, 0, Dataset::empty(mask.months(), mask.start), Dataset::empty(mask.months(), mask.start)};
  for (SeriesId id : all_series) {
    const auto& observed = mask.series(id);
    auto& obs = d.observations.series(id);
    auto& lat = d.latent.series(id);
    const double sigma = m.noise[id];
    for (std::size_t i = 0; i < mask.months(); ++i) {
      const double z = model_observable(id, states[i], m.params, target);
      lat[i] = z;
      const double eps = normal(rng);  // drawn for every cell so the stream does not depend on the mask
      if (observed[i] || all_cells) obs[i] = z * std::exp(sigma * eps);
    }
  }
  return d;
}

inline PredictiveEnsemble posterior_predictive(const PosteriorChains& pc, const Dataset& data, std::size_t n_draws,
                                               std::uint64_t seed,
                                               SuppliesTarget target = SuppliesTarget::inflow,
                                               const IntegratorConfig& cfg = likelihood_integrator_config()) {
  const std::size_t total = pc.n_chains() * pc.n_draws();
  if (total == 0) throw usage_error("posterior has no draws");
  Rng rng = chain_rng(seed, 0xfeed);
  // Distinct draws when possible (partial Fisher-Yates), otherwise with replacement.
  std::vector<std::size_t> picks;
  if (n_draws <= total) {
    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    for (std::size_t i = 0; i < n_draws; ++i) {
      std::uniform_int_distribution<std::size_t> u(i, total - 1);
      std::swap(idx[i], idx[u(rng)]);
      picks.push_back(idx[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> u(0, total - 1);
    for (std::size_t i = 0; i < n_draws; ++i) picks.push_back(u(rng));
  }
  PredictiveEnsemble ens;
  ens.requested = n_draws;
  for (std::size_t flat : picks) {
    const std::size_t c = flat / pc.n_draws(), i = flat % pc.n_draws();
    auto d = predictive_draw(pc.draw(c, i), data, rng, target, cfg);
    if (!d) {
      ++ens.skipped;
      continue;
    }
    d->chain = c;
    d->iteration = i;
    ens.draws.push_back(std::move(*d));
  }
  return ens;
}

struct BandRow {
  SeriesId series;
  std::size_t month;
  std::optional<double> observed;
  double lower, median, upper;  // 2.5%, 50%, 97.5% of the pseudo-observations
  double latent_lower, latent_median, latent_upper;
};

// Quantile bands per series and month; pseudo-observation bands only exist where the
// data were observed.
inline std::vector<BandRow> predictive_bands(const PredictiveEnsemble& ens, const Dataset& data) {
  std::vector<BandRow> rows;
  if (ens.draws.empty()) return rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (SeriesId id : all_series) {
    for (std::size_t i = 0; i < data.months(); ++i) {
      std::vector<double> obs, lat;
      for (const auto& d : ens.draws) {
        if (const auto& v = d.observations.series(id)[i]) obs.push_back(*v);
        lat.push_back(*d.latent.series(id)[i]);
      }
      BandRow r{id, i, data.series(id)[i], nan, nan, nan, quantile(lat, 0.025), quantile(lat, 0.5), quantile(lat, 0.975)};
      if (!obs.empty()) {
        r.lower = quantile(obs, 0.025);
        r.median = quantile(obs, 0.5);
        r.upper = quantile(obs, 0.975);
      }
      rows.push_back(r);
    }
  }
  return rows;
}

struct SynthesisOptions {
  YearMonth start{2015, 1};
  bool survey_herd = true;  // herd kept only in June and December, as in the UK census
  // true: new_supplies gets its own lognormal noise, exactly as the likelihood assumes.
  // false: new_supplies = production + imports - exports of the noisy flows, as in the
  // CSV pipeline.
  bool independent_supplies = false;
};

// Synthetic series from known parameters.
inline Dataset synthesize_dataset(const ModelDraw& truth, std::size_t months, std::uint64_t seed,
                                  const SynthesisOptions& opt = {},
                                  SuppliesTarget target = SuppliesTarget::inflow,
                                  const IntegratorConfig& cfg = likelihood_integrator_config()) {
  const YearMonth start = opt.start;
  const auto states = monthly_states(truth.params, truth.init, months, cfg);
  Rng rng = chain_rng(seed, 0xda7a);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d = Dataset::empty(months, start);
  for (std::size_t i = 0; i < months; ++i) {
    const Vec4& c = states[i];
    const auto fl = flows(c[0], truth.params);
    const double eh = normal(rng), ep = normal(rng), ei = normal(rng), ex = normal(rng), epr = normal(rng),
                 es = normal(rng);
    const int cal = start.plus(static_cast<int>(i)).month;
    if (!opt.survey_herd || cal == 6 || cal == 12) d.herd[i] = c[0] * std::exp(truth.noise.herd * eh);
    d.production[i] = fl.production * std::exp(truth.noise.production * ep);
    d.imports[i] = fl.imports * std::exp(truth.noise.imports * ei);
    d.exports[i] = fl.exports * std::exp(truth.noise.exports * ex);
    d.price[i] = c[3] * std::exp(truth.noise.price * epr);
    if (opt.independent_supplies)
      d.new_supplies[i] = model_observable(SeriesId::new_supplies, c, truth.params, target) *
                          std::exp(truth.noise.supplies * es);
  }
  if (!opt.independent_supplies) d.derive_new_supplies();
  return d;
}

} // namespace foodsys
