#pragma once

// JSON configs, chains CSV and output metadata.
//
// Parameter files are flat objects keyed by symbol name, either dimensional
//   {"a", "b", "e", "f", "g", "w", "s", "k", "h", "m", "q", "r", "C0", "I0", "D0", "P0"}
// or dimensionless
//   {"alpha", "beta", "delta", "omega", "gamma", "kappa", "mu", "rho"} plus optional
//   {"v0", "x0", "y0", "z0"}.
// Unknown keys are rejected everywhere.

#include <cerrno>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "foodsys/data.hpp"
#include "foodsys/errors.hpp"
#include "foodsys/inference.hpp"
#include "foodsys/model.hpp"
#include "foodsys/stability.hpp"

namespace foodsys {

using json = nlohmann::ordered_json;

class config_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Hash of the canonical (sorted-key, compact) serialisation.
inline std::string config_hash(const json& config) {
  const nlohmann::json canonical = nlohmann::json::parse(config.dump());
  return hex64(fnv1a(canonical.dump()));
}

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw config_error(what + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw config_error(what + ": unknown key '" + key + "'");
}

inline double number(const json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key)) throw config_error(what + ": missing key '" + key + "'");
  if (!j.at(key).is_number()) throw config_error(what + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& what) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw config_error(what + ": '" + key + "' has the wrong type");
  }
}

} // namespace detail

struct DimensionalInput {
  DimensionalParams params;
  InitialState init;
};

struct DimensionlessInput {
  DimensionlessParams params;
  Vec4 init{1.0, 1.0, 1.0, 1.0};
};

using ParamsInput = std::variant<DimensionalInput, DimensionlessInput>;

inline ParamsInput params_from_json(const json& j) {
  static const std::set<std::string> dim{"a", "b", "e", "f", "g", "w", "s", "k", "h", "m", "q", "r",
                                         "C0", "I0", "D0", "P0"};
  static const std::set<std::string> nondim{"alpha", "beta", "delta", "omega", "gamma", "kappa", "mu", "rho",
                                            "v0", "x0", "y0", "z0"};
  if (!j.is_object()) throw config_error("parameter file must be a JSON object");
  const bool dimensionless = j.contains("alpha") || j.contains("kappa") || j.contains("gamma");
  const std::string what = dimensionless ? "dimensionless parameters" : "dimensional parameters";
  detail::reject_unknown(j, dimensionless ? nondim : dim, what);
  auto n = [&](const char* key) { return detail::number(j, key, what); };
  if (dimensionless) {
    DimensionlessInput in;
    in.params = {n("alpha"), n("beta"), n("delta"), n("omega"), n("gamma"), n("kappa"), n("mu"), n("rho")};
    const int given = j.contains("v0") + j.contains("x0") + j.contains("y0") + j.contains("z0");
    if (given == 4) in.init = {n("v0"), n("x0"), n("y0"), n("z0")};
    else if (given != 0) throw config_error(what + ": give all of v0, x0, y0, z0 or none");
    validate(in.params);
    return in;
  }
  DimensionalInput in;
  auto& p = in.params;
  p.a = n("a"), p.b = n("b"), p.e = n("e"), p.f = n("f"), p.g = n("g"), p.w = n("w");
  p.s = n("s"), p.k = n("k"), p.h = n("h"), p.m = n("m"), p.q = n("q"), p.r = n("r");
  in.init = {n("C0"), n("I0"), n("D0"), n("P0")};
  validate(in.params);
  validate(in.init);
  return in;
}

inline json to_json(const DimensionalParams& p, const InitialState& s) {
  return json{{"a", p.a}, {"b", p.b}, {"e", p.e}, {"f", p.f}, {"g", p.g}, {"w", p.w},
              {"s", p.s}, {"k", p.k}, {"h", p.h}, {"m", p.m}, {"q", p.q}, {"r", p.r},
              {"C0", s.C0}, {"I0", s.I0}, {"D0", s.D0}, {"P0", s.P0}};
}

inline json to_json(const DimensionlessParams& p) {
  return json{{"alpha", p.alpha}, {"beta", p.beta},   {"delta", p.delta}, {"omega", p.omega},
              {"gamma", p.gamma}, {"kappa", p.kappa}, {"mu", p.mu},       {"rho", p.rho}};
}

inline json to_json(const ParamsInput& in) {
  if (const auto* d = std::get_if<DimensionalInput>(&in)) return to_json(d->params, d->init);
  const auto& n = std::get<DimensionlessInput>(in);
  json j = to_json(n.params);
  j["v0"] = n.init[0], j["x0"] = n.init[1], j["y0"] = n.init[2], j["z0"] = n.init[3];
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("'" + path + "' is not valid JSON: " + e.what());
  }
}

// MCMC configuration:
//   {"chains", "warmup", "draws", "seed", "steps_per_iteration", "target_accept",
//    "init_radius", "transform_scales": {name: divisor}, "b", "g", "supplies_target",
//    "rel_tol", "abs_tol"}
inline McmcConfig mcmc_config_from_json(const json& j) {
  const std::string what = "mcmc config";
  detail::reject_unknown(j, {"chains", "warmup", "draws", "seed", "steps_per_iteration", "target_accept", "init_radius",
                             "transform_scales", "b", "g", "supplies_target", "rel_tol", "abs_tol"},
                         what);
  McmcConfig cfg;
  auto& s = cfg.sampler;
  s.n_chains = detail::get_or<std::size_t>(j, "chains", s.n_chains, what);
  s.warmup = detail::get_or<std::size_t>(j, "warmup", s.warmup, what);
  s.draws = detail::get_or<std::size_t>(j, "draws", s.draws, what);
  s.seed = detail::get_or<std::uint64_t>(j, "seed", s.seed, what);
  s.steps_per_iteration = detail::get_or<std::size_t>(j, "steps_per_iteration", s.steps_per_iteration, what);
  s.target_accept = detail::get_or<double>(j, "target_accept", s.target_accept, what);
  s.init_radius = detail::get_or<double>(j, "init_radius", s.init_radius, what);
  if (s.n_chains < 2) throw config_error(what + ": at least two chains are needed for R-hat");
  if (s.draws < 20) throw config_error(what + ": at least 20 draws are needed");
  if (!(s.target_accept > 0.0 && s.target_accept < 1.0)) throw config_error(what + ": target_accept must lie in (0, 1)");
  if (j.contains("transform_scales")) {
    const auto& ts = j.at("transform_scales");
    if (!ts.is_object()) throw config_error(what + ": transform_scales must be an object");
    for (const auto& [key, val] : ts.items()) {
      std::size_t idx = n_sampled;
      for (std::size_t i = 0; i < n_sampled; ++i)
        if (key == sampled_names[i]) idx = i;
      if (idx == n_sampled || idx == index_k) throw config_error(what + ": no transform scale named '" + key + "'");
      if (!val.is_number() || !(val.get<double>() > 0.0))
        throw config_error(what + ": transform scale '" + key + "' must be a positive number");
      cfg.transform.scales[idx] = val.get<double>();
    }
  }
  cfg.transform.b = detail::get_or<double>(j, "b", cfg.transform.b, what);
  cfg.transform.g = detail::get_or<double>(j, "g", cfg.transform.g, what);
  if (!(cfg.transform.b > 0.0 && cfg.transform.g > 0.0)) throw config_error(what + ": b and g must be > 0");
  const auto target = detail::get_or<std::string>(j, "supplies_target", "inflow", what);
  if (target == "inflow") cfg.supplies_target = SuppliesTarget::inflow;
  else if (target == "state") cfg.supplies_target = SuppliesTarget::state;
  else throw config_error(what + ": supplies_target must be 'inflow' or 'state'");
  cfg.integrator.rel_tol = detail::get_or<double>(j, "rel_tol", cfg.integrator.rel_tol, what);
  cfg.integrator.abs_tol = detail::get_or<double>(j, "abs_tol", cfg.integrator.abs_tol, what);
  return cfg;
}

inline json transform_scales_json(const TransformSpec& t) {
  json j = json::object();
  for (std::size_t i = 0; i < n_sampled; ++i)
    if (i != index_k) j[sampled_names[i]] = t.scales[i];
  return j;
}

inline json to_json(const McmcConfig& cfg) {
  const auto& s = cfg.sampler;
  return json{{"chains", s.n_chains},
              {"warmup", s.warmup},
              {"draws", s.draws},
              {"seed", s.seed},
              {"steps_per_iteration", s.steps_per_iteration ? s.steps_per_iteration : 4 * n_sampled},
              {"target_accept", s.target_accept},
              {"init_radius", s.init_radius},
              {"transform_scales", transform_scales_json(cfg.transform)},
              {"b", cfg.transform.b},
              {"g", cfg.transform.g},
              {"supplies_target", to_string(cfg.supplies_target)},
              {"rel_tol", cfg.integrator.rel_tol},
              {"abs_tol", cfg.integrator.abs_tol}};
}

// Regime-map sweep:
//   {"kappa": {"min", "max", "steps"}, "alpha": {...}, "betas": [...], "gamma", "omega",
//    "delta", "mu", "rho", "verify", "horizon", "boundary_band",
//    "sensitivity": {"parameters": [...], "multipliers": [...]}}
struct SweepConfig {
  RegimeGrid grid;
  RegimeMapOptions options;
  std::vector<std::string> sensitivity_parameters{"q", "b", "e", "a", "w", "s", "k"};
  std::vector<double> sensitivity_multipliers = linspace(0.5, 1.5, 21);
};

inline SweepConfig sweep_config_from_json(const json& j) {
  const std::string what = "regime-map config";
  detail::reject_unknown(j, {"kappa", "alpha", "betas", "gamma", "omega", "delta", "mu", "rho", "verify", "horizon",
                             "boundary_band", "sensitivity"},
                         what);
  SweepConfig c;
  auto range = [&](const char* key, double& lo, double& hi, std::size_t& steps) {
    if (!j.contains(key)) return;
    const auto& r = j.at(key);
    detail::reject_unknown(r, {"min", "max", "steps"}, what + "." + key);
    lo = detail::get_or<double>(r, "min", lo, what);
    hi = detail::get_or<double>(r, "max", hi, what);
    steps = detail::get_or<std::size_t>(r, "steps", steps, what);
    if (steps < 1 || !(hi >= lo)) throw config_error(what + ": bad range for '" + key + "'");
  };
  auto& g = c.grid;
  range("kappa", g.kappa_min, g.kappa_max, g.kappa_steps);
  range("alpha", g.alpha_min, g.alpha_max, g.alpha_steps);
  g.betas = detail::get_or<std::vector<double>>(j, "betas", g.betas, what);
  if (g.betas.empty()) throw config_error(what + ": betas must not be empty");
  g.gamma = detail::get_or<double>(j, "gamma", g.gamma, what);
  g.omega = detail::get_or<double>(j, "omega", g.omega, what);
  g.delta = detail::get_or<double>(j, "delta", g.delta, what);
  g.mu = detail::get_or<double>(j, "mu", g.mu, what);
  g.rho = detail::get_or<double>(j, "rho", g.rho, what);
  c.options.verify_by_simulation = detail::get_or<bool>(j, "verify", false, what);
  c.options.horizon = detail::get_or<double>(j, "horizon", c.options.horizon, what);
  c.options.boundary_band = detail::get_or<double>(j, "boundary_band", c.options.boundary_band, what);
  if (j.contains("sensitivity")) {
    const auto& s = j.at("sensitivity");
    detail::reject_unknown(s, {"parameters", "multipliers"}, what + ".sensitivity");
    c.sensitivity_parameters = detail::get_or(s, "parameters", c.sensitivity_parameters, what);
    c.sensitivity_multipliers = detail::get_or(s, "multipliers", c.sensitivity_multipliers, what);
  }
  return c;
}

inline json to_json(const SweepConfig& c) {
  const auto& g = c.grid;
  return json{{"kappa", {{"min", g.kappa_min}, {"max", g.kappa_max}, {"steps", g.kappa_steps}}},
              {"alpha", {{"min", g.alpha_min}, {"max", g.alpha_max}, {"steps", g.alpha_steps}}},
              {"betas", g.betas},
              {"gamma", g.gamma},
              {"omega", g.omega},
              {"delta", g.delta},
              {"mu", g.mu},
              {"rho", g.rho},
              {"verify", c.options.verify_by_simulation},
              {"horizon", c.options.horizon},
              {"boundary_band", c.options.boundary_band},
              {"sensitivity", {{"parameters", c.sensitivity_parameters}, {"multipliers", c.sensitivity_multipliers}}}};
}

// Metadata carried by every output file.
struct Metadata {
  std::string tool = "foodsys";
  std::string version;
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> extra;

  json to_json() const {
    json j{{"tool", tool}, {"version", version}, {"command", command}, {"config_hash", config_hash}, {"seed", seed}};
    for (const auto& [k, v] : extra) j[k] = v;
    return j;
  }

  // "# key: value" lines that precede the CSV header.
  void write_csv_preamble(std::ostream& out) const {
    out << "# tool: " << tool << '\n'
        << "# version: " << version << '\n'
        << "# command: " << command << '\n'
        << "# config_hash: " << config_hash << '\n'
        << "# seed: " << seed << '\n';
    for (const auto& [k, v] : extra) out << "# " << k << ": " << v << '\n';
  }
};

// Chains CSV: preamble, then one row per draw
//   chain,iteration,a,e,f,k,h,w,s,m,q,r,C0,I0,D0,P0,sigma_herd,...,eps_exports,b,g,log_posterior
inline std::string chains_csv_header() {
  std::string h = "chain,iteration";
  for (const char* n : sampled_names) h += std::string(",") + n;
  return h + ",b,g,log_posterior";
}

inline void write_chains_csv(std::ostream& out, const PosteriorChains& pc, Metadata meta) {
  std::string scales;
  for (std::size_t i = 0; i < n_sampled; ++i) {
    if (i) scales += ' ';
    scales += format_number(pc.transform.scales[i]);
  }
  meta.extra.push_back({"transform_scales", scales});
  meta.write_csv_preamble(out);
  out << chains_csv_header() << '\n';
  for (std::size_t c = 0; c < pc.n_chains(); ++c)
    for (std::size_t i = 0; i < pc.n_draws(); ++i) {
      const auto nat = pc.transform.natural(pc.draw(c, i));
      out << c << ',' << i;
      for (double v : nat) out << ',' << format_number(v);
      out << ',' << format_number(pc.transform.b) << ',' << format_number(pc.transform.g) << ','
          << format_number(pc.log_posterior[c][i]) << '\n';
    }
}

struct ChainsFile {
  PosteriorChains chains;
  std::map<std::string, std::string> metadata;
};

inline ChainsFile read_chains_csv(std::istream& in) {
  ChainsFile f;
  std::string line;
  std::size_t row = 0;
  bool header = false;
  TransformSpec t;
  std::vector<std::vector<double>> natural_rows;
  std::vector<std::size_t> chain_of, iter_of;
  std::vector<double> lp;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon != std::string::npos)
        f.metadata[detail::trim(line.substr(1, colon - 1))] = detail::trim(line.substr(colon + 1));
      continue;
    }
    if (!header) {
      if (line != chains_csv_header()) throw load_error(row, "header", "not a chains file header");
      header = true;
      continue;
    }
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != n_sampled + 5) throw load_error(row, "", "expected " + std::to_string(n_sampled + 5) + " cells");
    auto num = [&](std::size_t i) {
      const auto v = detail::parse_value(cells[i], row, i < 2 ? "chain" : "value");
      if (!v) throw load_error(row, "", "empty cell");
      return *v;
    };
    chain_of.push_back(static_cast<std::size_t>(num(0)));
    iter_of.push_back(static_cast<std::size_t>(num(1)));
    std::vector<double> nat(n_sampled);
    for (std::size_t i = 0; i < n_sampled; ++i) nat[i] = num(2 + i);
    natural_rows.push_back(nat);
    t.b = num(2 + n_sampled);
    t.g = num(3 + n_sampled);
    char* end = nullptr;
    lp.push_back(std::strtod(cells.back().c_str(), &end));
    if (end == cells.back().c_str()) throw load_error(row, "log_posterior", "non-numeric value");
  }
  if (!header) throw load_error(row, "header", "missing chains header");
  if (natural_rows.empty()) throw load_error(row, "", "chains file has no draws");
  if (auto it = f.metadata.find("transform_scales"); it != f.metadata.end()) {
    std::istringstream ss(it->second);
    for (auto& s : t.scales)
      if (!(ss >> s)) throw load_error(0, "transform_scales", "malformed transform scales");
  }
  auto& pc = f.chains;
  pc.transform = t;
  for (std::size_t r = 0; r < natural_rows.size(); ++r) {
    const std::size_t c = chain_of[r];
    if (c >= pc.theta.size()) {
      pc.theta.resize(c + 1);
      pc.log_posterior.resize(c + 1);
    }
    if (iter_of[r] != pc.theta[c].size()) throw load_error(r + 1, "iteration", "draws out of order");
    pc.theta[c].push_back(t.to_unconstrained(t.from_natural(natural_rows[r])));
    pc.log_posterior[c].push_back(lp[r]);
  }
  for (const auto& c : pc.theta)
    if (c.size() != pc.theta.front().size()) throw load_error(0, "chain", "chains have different lengths");
  if (auto it = f.metadata.find("seed"); it != f.metadata.end()) pc.seed = std::stoull(it->second);
  return f;
}

inline json to_json(const ScalarSummary& s) {
  return json{{"mean", s.mean},
              {"sd", s.sd},
              {"hdi95", {s.hdi95.lower, s.hdi95.upper}},
              {"ess", s.ess},
              {"rhat", s.rhat},
              {"flagged", s.flagged}};
}

inline json to_json(const PosteriorSummary& summary) {
  json j = json::object();
  for (const auto& n : summary) j[n.name] = to_json(n.summary);
  return j;
}

inline std::string complex_str(std::complex<double> z) {
  return format_number(z.real()) + (z.imag() < 0 ? "-" : "+") + format_number(std::abs(z.imag())) + "i";
}

} // namespace foodsys
