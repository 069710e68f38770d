#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "foodsys/data.hpp"
#include "foodsys/inference.hpp"
#include "foodsys/io.hpp"
#include "foodsys/model.hpp"
#include "foodsys/simulate.hpp"
#include "foodsys/stability.hpp"

namespace fs = std::filesystem;
using namespace foodsys;

namespace {

enum Exit { ok = 0, computation_failed = 1, bad_input = 2 };

struct Globals {
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string out = ".";
  std::string format = "csv";
  unsigned threads = 1;
};

// A table cell is a number, a string, or null (missing).
using Row = std::vector<json>;

struct Table {
  std::vector<std::string> columns;
  std::vector<Row> rows;
};

std::string cell_text(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  return format_number(v.get<double>());
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Writer {
public:
  explicit Writer(const Globals& g) : g_(g) {}

  void prepare() const {
    std::error_code ec;
    fs::create_directories(g_.out, ec);
    const fs::path probe = fs::path(g_.out) / ".foodsys_write_probe";
    std::ofstream test(probe);
    if (!test) throw config_error("output directory '" + g_.out + "' is not writable");
    test.close();
    fs::remove(probe, ec);
  }

  std::string table(const std::string& stem, const Table& t, const Metadata& meta) const {
    const bool as_json = g_.format == "json";
    const fs::path path = fs::path(g_.out) / (stem + (as_json ? ".json" : ".csv"));
    std::ostringstream out;
    if (as_json) {
      json rows = json::array();
      for (const auto& r : t.rows) {
        json obj = json::object();
        for (std::size_t i = 0; i < t.columns.size(); ++i) obj[t.columns[i]] = r[i];
        rows.push_back(obj);
      }
      out << json{{"metadata", meta.to_json()}, {"columns", t.columns}, {"rows", rows}}.dump(2) << '\n';
    } else {
      meta.write_csv_preamble(out);
      for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
      out << '\n';
      for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << cell_text(r[i]);
        out << '\n';
      }
    }
    return text(path, out.str());
  }

  std::string report(const std::string& stem, json body, const Metadata& meta) const {
    json doc{{"metadata", meta.to_json()}};
    for (auto& [k, v] : body.items()) doc[k] = v;
    return text(fs::path(g_.out) / (stem + ".json"), doc.dump(2) + "\n");
  }

  std::string text(const fs::path& path, const std::string& contents) const {
    std::ofstream out(path, std::ios::binary);
    out << contents;
    out.close();
    if (!out) throw std::runtime_error("failed to write '" + path.string() + "'");
    std::cerr << "wrote " << path.string() << '\n';
    return path.string();
  }

private:
  const Globals& g_;
};

Metadata metadata(const std::string& command, const json& config, std::uint64_t seed) {
  Metadata m;
  m.version = FOODSYS_VERSION;
  m.command = command;
  m.config_hash = config_hash(json{{"command", command}, {"config", config}});
  m.seed = seed;
  return m;
}

// ---------------------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string params;
  double horizon = 120.0;
  double step = 1.0;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
};

Table trajectory_table(const Trajectory& traj) {
  Table t;
  t.columns = traj.frame == Frame::dimensional ? std::vector<std::string>{"t", "C", "I", "D", "P"}
                                               : std::vector<std::string>{"tau", "v", "x", "y", "z"};
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const auto& s = traj.states[i];
    t.rows.push_back({traj.times[i], s[0], s[1], s[2], s[3]});
  }
  return t;
}

int run_simulate(const Globals& g, const SimulateArgs& a) {
  const auto input = params_from_json(read_json_file(a.params));
  if (!(a.horizon > 0.0) || !(a.step > 0.0)) throw config_error("horizon and step must be > 0");
  IntegratorConfig cfg;
  cfg.rel_tol = a.rel_tol;
  cfg.abs_tol = a.abs_tol;
  cfg = model_integrator_config(cfg);
  const json config{{"params", to_json(input)}, {"horizon", a.horizon}, {"step", a.step},
                    {"rel_tol", a.rel_tol}, {"abs_tol", a.abs_tol}};
  Metadata meta = metadata("simulate", config, g.seed);
  meta.extra = {{"rel_tol", format_number(a.rel_tol)}, {"abs_tol", format_number(a.abs_tol)}};
  const auto times = regular_times(0.0, a.horizon, a.step);

  std::vector<std::pair<std::string, Trajectory>> outputs;
  if (const auto* d = std::get_if<DimensionalInput>(&input)) {
    auto traj = simulate_dimensional(d->params, d->init, times, cfg);
    auto scaled = nondimensionalise(traj, d->params, d->init);
    outputs.emplace_back("trajectory_dimensional", std::move(traj));
    outputs.emplace_back("trajectory_dimensionless", std::move(scaled));
  } else {
    const auto& n = std::get<DimensionlessInput>(input);
    outputs.emplace_back("trajectory_dimensionless", simulate_dimensionless(n.params, n.init, times, cfg));
  }
  Writer w(g);
  w.prepare();
  for (const auto& [stem, traj] : outputs) {
    Metadata m = meta;
    m.extra.push_back({"frame", to_string(traj.frame)});
    w.table(stem, trajectory_table(traj), m);
  }
  return ok;
}

// ---------------------------------------------------------------------------------------
// stability

json eigen_json(const std::vector<std::complex<double>>& ev) {
  json out = json::array();
  for (const auto& z : ev) out.push_back({{"re", z.real()}, {"im", z.imag()}});
  return out;
}

int run_stability(const Globals& g, const std::string& params_path) {
  const auto input = params_from_json(read_json_file(params_path));
  DimensionlessParams p;
  const DimensionalInput* dim = std::get_if<DimensionalInput>(&input);
  if (dim) p = nondimensionalise(dim->params, dim->init).params;
  else p = std::get<DimensionlessInput>(input).params;

  json body;
  body["input_frame"] = dim ? "dimensional" : "dimensionless";
  body["dimensionless"] = to_json(p);
  if (p.kappa > 0.0) {
    body["critical_ratio"] = critical_ratio(p);
    const auto ck = critical_trade_strength(p);
    body["surplus_ratio"] = surplus_ratio(p);
    body["critical_kappa"] = {{"value", ck.kappa}, {"reachable", ck.reachable}};
    if (p.kappa < 1.0) {
      const auto r = classify_regime(p);
      body["regime"] = {{"kind", to_string(r.kind)}, {"boundary", r.boundary}};
    }
    const auto c = unsustainable_cubic(p);
    body["unsustainable_cubic"] = {{"c2", c.c2}, {"c1", c.c1}, {"c0", c.c0},
                                   {"routh_hurwitz_stable", routh_hurwitz_stable_cubic(c.c2, c.c1, c.c0)}};
  } else {
    body["critical_ratio"] = nullptr;
    body["surplus_ratio"] = surplus_ratio(p);
    body["critical_kappa"] = {{"value", surplus_ratio(p)}, {"reachable", surplus_ratio(p) < 1.0}};
  }

  Table table;
  table.columns = {"kind", "exists", "singular", "v", "x", "y", "z", "verdict", "method", "leading_real",
                   "eigenvalues", "return_time"};
  json points = json::array();
  for (const auto& fp : fixed_points(p)) {
    json jp{{"kind", to_string(fp.kind)}, {"exists", fp.exists}, {"singular", fp.singular},
            {"state", {fp.state[0], fp.state[1], fp.state[2], fp.state[3]}}};
    if (!fp.reason.empty()) jp["reason"] = fp.reason;
    if (dim) {
      const auto c = redimensionalise(fp.state, dim->params, dim->init);
      jp["state_dimensional"] = {c[0], c[1], c[2], c[3]};
    }
    Row row{to_string(fp.kind), fp.exists, fp.singular, fp.state[0], fp.state[1], fp.state[2], fp.state[3]};
    if (fp.exists) {
      const auto rep = stability_report(fp, p);
      jp["verdict"] = to_string(rep.verdict);
      jp["method"] = rep.method;
      jp["non_hyperbolic"] = rep.non_hyperbolic;
      jp["eigenvalues"] = eigen_json(rep.eigenvalues);
      jp["return_time"] = rep.return_time ? json(*rep.return_time) : json(nullptr);
      if (dim && rep.return_time) jp["return_time_dimensional"] = *rep.return_time / dim->params.a;
      if (!rep.note.empty()) jp["note"] = rep.note;
      std::string evs;
      for (const auto& z : rep.eigenvalues) evs += (evs.empty() ? "" : ";") + complex_str(z);
      row.insert(row.end(), {to_string(rep.verdict), rep.method,
                             rep.eigenvalues.empty() ? json(nullptr) : json(rep.eigenvalues.front().real()), evs,
                             rep.return_time ? json(*rep.return_time) : json(nullptr)});
    } else {
      row.insert(row.end(), {nullptr, nullptr, nullptr, nullptr, nullptr});
    }
    points.push_back(jp);
    table.rows.push_back(row);
  }
  body["fixed_points"] = points;

  const Metadata meta = metadata("stability", to_json(input), g.seed);
  Writer w(g);
  w.prepare();
  w.report("stability", body, meta);
  if (g.format == "csv") w.table("fixed_points", table, meta);
  return ok;
}

// ---------------------------------------------------------------------------------------
// regime-map

int run_regime_map(const Globals& g, const std::string& config_path, bool verify) {
  SweepConfig sweep = config_path.empty() ? SweepConfig{} : sweep_config_from_json(read_json_file(config_path));
  if (verify) sweep.options.verify_by_simulation = true;
  sweep.options.threads = g.threads;
  const auto cells = regime_map(sweep.grid, sweep.options);

  Table map;
  map.columns = {"kappa", "alpha", "beta", "critical_ratio", "surplus_ratio", "regime", "simulated_agreement"};
  std::size_t checked = 0, agreed = 0;
  for (const auto& c : cells) {
    json agreement = nullptr;
    if (c.agreement) agreement = *c.agreement;
    map.rows.push_back({c.kappa, c.alpha, c.beta, c.regime.critical_ratio, c.regime.surplus_ratio,
                        to_string(c.regime.kind), agreement});
    if (c.agreement && !c.regime.boundary) {
      ++checked;
      agreed += *c.agreement;
    }
  }

  Table sens;
  sens.columns = {"parameter", "multiplier", "critical_ratio"};
  const auto reference = sensitivity_reference();
  for (const auto& name : sweep.sensitivity_parameters)
    for (const auto& pt : sensitivity_curve(reference, sweep.sensitivity_multipliers, name))
      sens.rows.push_back({name, pt.multiplier, pt.critical_ratio});

  const Metadata meta = metadata("regime-map", to_json(sweep), g.seed);
  Writer w(g);
  w.prepare();
  w.table("regime_map", map, meta);
  w.table("sensitivity", sens, meta);
  if (sweep.options.verify_by_simulation)
    std::cout << "simulation agreement outside the boundary band: " << agreed << "/" << checked << '\n';
  return ok;
}

// ---------------------------------------------------------------------------------------
// fit

int run_fit(const Globals& g, const std::string& data_path, const std::string& config_path) {
  McmcConfig cfg = config_path.empty() ? McmcConfig{} : mcmc_config_from_json(read_json_file(config_path));
  if (g.seed_given) cfg.sampler.seed = g.seed;
  cfg.sampler.threads = g.threads;
  const Dataset data = load_csv(data_path);
  require_fit_ready(data);

  const json config = to_json(cfg);
  Metadata meta = metadata("fit", json{{"mcmc", config}, {"data_fnv1a", hex64(fnv1a(file_bytes(data_path)))}},
                           cfg.sampler.seed);
  meta.extra = {{"supplies_target", to_string(cfg.supplies_target)}};
  Writer w(g);
  w.prepare();

  const auto pc = sample_posterior(data, cfg);
  const auto params = parameter_summaries(pc);
  const auto derived = derived_posteriors(pc);
  double max_rhat = 0.0, min_ess = std::numeric_limits<double>::infinity();
  for (const auto& n : params) {
    max_rhat = std::max(max_rhat, n.summary.rhat);
    min_ess = std::min(min_ess, n.summary.ess);
  }
  json body{{"config", config},
            {"data", {{"months", data.months()}, {"start", data.start.str()}, {"observed", data.total_observed()}}},
            {"sampler",
             {{"acceptance", pc.acceptance},
              {"warmup_acceptance", pc.warmup_acceptance},
              {"integration_failures", pc.integration_failures}}},
            {"convergence", {{"max_rhat", max_rhat}, {"min_ess", min_ess}, {"rhat_below_1_01", max_rhat < 1.01},
                             {"ess_above_400", min_ess > 400.0}}},
            {"parameters", to_json(params)},
            {"derived", to_json(derived)}};

  std::ostringstream chains;
  write_chains_csv(chains, pc, meta);
  w.text(fs::path(g.out) / "chains.csv", chains.str());
  w.report("summary", body, meta);
  std::cout << "max R-hat " << format_number(max_rhat) << ", min ESS " << format_number(min_ess) << '\n';
  return ok;
}

// ---------------------------------------------------------------------------------------
// predict

int run_predict(const Globals& g, const std::string& chains_path, const std::string& data_path, std::size_t n_draws) {
  std::ifstream in(chains_path);
  if (!in) throw config_error("cannot open '" + chains_path + "'");
  const auto file = read_chains_csv(in);
  const Dataset data = load_csv(data_path);
  SuppliesTarget target = SuppliesTarget::inflow;
  if (auto it = file.metadata.find("supplies_target"); it != file.metadata.end() && it->second == "state")
    target = SuppliesTarget::state;
  if (n_draws == 0) throw config_error("--draws must be positive");

  const auto ens = posterior_predictive(file.chains, data, n_draws, g.seed, target);
  if (ens.draws.empty()) throw std::runtime_error("every predictive draw failed to integrate");
  const auto bands = predictive_bands(ens, data);

  Table band_table;
  band_table.columns = {"series", "month", "date", "observed", "lower", "median", "upper",
                        "latent_lower", "latent_median", "latent_upper"};
  for (const auto& b : bands)
    band_table.rows.push_back({to_string(b.series), b.month, data.start.plus(static_cast<int>(b.month)).str(),
                               b.observed ? json(*b.observed) : json(nullptr), number_or_null(b.lower),
                               number_or_null(b.median), number_or_null(b.upper), b.latent_lower, b.latent_median,
                               b.latent_upper});
  Table draw_table;
  draw_table.columns = {"draw", "chain", "iteration", "series", "month", "value", "latent"};
  for (std::size_t k = 0; k < ens.draws.size(); ++k) {
    const auto& d = ens.draws[k];
    for (SeriesId id : all_series)
      for (std::size_t i = 0; i < data.months(); ++i) {
        const auto& v = d.observations.series(id)[i];
        draw_table.rows.push_back({k, d.chain, d.iteration, to_string(id), i, v ? json(*v) : json(nullptr),
                                   *d.latent.series(id)[i]});
      }
  }

  const json config{{"chains_fnv1a", hex64(fnv1a(file_bytes(chains_path)))},
                    {"data_fnv1a", hex64(fnv1a(file_bytes(data_path)))},
                    {"draws", n_draws}};
  Metadata meta = metadata("predict", config, g.seed);
  meta.extra = {{"requested_draws", std::to_string(ens.requested)}, {"skipped_draws", std::to_string(ens.skipped)}};
  Writer w(g);
  w.prepare();
  w.table("predictive_bands", band_table, meta);
  w.table("predictive_draws", draw_table, meta);
  return ok;
}

// ---------------------------------------------------------------------------------------
// validate-data

int run_validate(const Globals& g, const std::string& data_path) {
  const Dataset data = load_csv(data_path);
  const auto rep = validate(data);
  json series = json::array();
  for (const auto& s : rep.series)
    series.push_back({{"series", to_string(s.id)},
                      {"observed", s.observed},
                      {"missing", s.missing},
                      {"longest_gap", s.longest_gap},
                      {"min", s.min ? json(*s.min) : json(nullptr)},
                      {"max", s.max ? json(*s.max) : json(nullptr)},
                      {"positive", s.positive}});
  json findings = json::array();
  for (const auto& f : rep.findings)
    findings.push_back({{"severity", to_string(f.severity)}, {"series", f.series}, {"message", f.message}});
  const json body{{"months", rep.months}, {"start", rep.start.str()}, {"fit_ready", !rep.fatal()},
                  {"series", series}, {"findings", findings}};
  const Metadata meta = metadata("validate-data", json{{"data_fnv1a", hex64(fnv1a(file_bytes(data_path)))}}, g.seed);
  Writer w(g);
  w.prepare();
  w.report("validation", body, meta);
  for (const auto& f : rep.findings)
    std::cout << to_string(f.severity) << (f.series.empty() ? "" : " [" + f.series + "]") << ": " << f.message << '\n';
  return rep.fatal() ? bad_input : ok;
}

// ---------------------------------------------------------------------------------------
// synthesize-data

struct SynthesizeArgs {
  std::string truth;
  std::size_t months = 60;
  double noise = 0.05;
  std::string start = "2015-01";
  bool all_herd = false;
  bool independent_supplies = false;
  std::string name = "synthetic";
};

int run_synthesize(const Globals& g, const SynthesizeArgs& a) {
  const auto input = params_from_json(read_json_file(a.truth));
  const auto* dim = std::get_if<DimensionalInput>(&input);
  if (!dim) throw config_error("synthesize-data needs dimensional parameters");
  if (!(a.noise > 0.0)) throw config_error("--noise must be > 0");
  ModelDraw truth{dim->params, dim->init, {a.noise, a.noise, a.noise, a.noise, a.noise, a.noise}};
  SynthesisOptions opt;
  opt.start = detail::parse_month(a.start, 0);
  opt.survey_herd = !a.all_herd;
  opt.independent_supplies = a.independent_supplies;
  const Dataset d = synthesize_dataset(truth, a.months, g.seed, opt);

  const json config{{"truth", to_json(input)}, {"months", a.months}, {"noise", a.noise}, {"start", a.start},
                    {"survey_herd", opt.survey_herd}, {"independent_supplies", opt.independent_supplies}};
  const Metadata meta = metadata("synthesize-data", config, g.seed);
  Writer w(g);
  w.prepare();
  std::ostringstream csv;
  write_csv(csv, d);
  // The data schema fixes the first line, so metadata goes to a sidecar file.
  w.text(fs::path(g.out) / (a.name + ".csv"), csv.str());
  w.report(a.name + ".meta", json{{"config", config}}, meta);
  return ok;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"foodsys: food-system dynamics, stability regimes and Bayesian fitting"};
  app.set_version_flag("--version", std::string(FOODSYS_VERSION));
  Globals g;
  app.add_option("--seed", g.seed, "Random seed recorded in every output")->each([&](const std::string&) {
    g.seed_given = true;
  });
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--format", g.format, "Tabular output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--threads", g.threads, "Maximum worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Integrate the model and write trajectories");
  simulate->add_option("--params", sim.params, "Parameter JSON (dimensional or dimensionless)")->required();
  simulate->add_option("--horizon", sim.horizon, "End time in the input frame's units")->capture_default_str();
  simulate->add_option("--step", sim.step, "Output spacing")->capture_default_str();
  simulate->add_option("--rel-tol", sim.rel_tol)->capture_default_str();
  simulate->add_option("--abs-tol", sim.abs_tol)->capture_default_str();

  std::string stability_params;
  auto* stability = app.add_subcommand("stability", "Fixed points, eigenvalues, verdicts and critical ratios");
  stability->add_option("--params", stability_params, "Parameter JSON")->required();

  std::string sweep_path;
  bool verify = false;
  auto* regime = app.add_subcommand("regime-map", "Sweep the (kappa, alpha) plane and sensitivity curves");
  regime->add_option("--config", sweep_path, "Sweep JSON (defaults reproduce the reference panels)");
  regime->add_flag("--verify", verify, "Check every cell against a long simulation");

  std::string fit_data, fit_config;
  auto* fit = app.add_subcommand("fit", "Sample the posterior for a monthly dataset");
  fit->add_option("--data", fit_data, "Monthly CSV")->required();
  fit->add_option("--config", fit_config, "MCMC config JSON");

  std::string pred_chains, pred_data;
  std::size_t pred_draws = 200;
  auto* predict = app.add_subcommand("predict", "Posterior predictive bands and draws");
  predict->add_option("--chains", pred_chains, "chains.csv written by fit")->required();
  predict->add_option("--data", pred_data, "Monthly CSV used for the fit")->required();
  predict->add_option("--draws", pred_draws, "Number of posterior draws")->capture_default_str();

  std::string val_data;
  auto* validate_cmd = app.add_subcommand("validate-data", "Check a monthly CSV against the schema");
  validate_cmd->add_option("--data", val_data, "Monthly CSV")->required();

  SynthesizeArgs syn;
  auto* synth = app.add_subcommand("synthesize-data", "Generate a noisy monthly CSV from known parameters");
  synth->add_option("--truth", syn.truth, "Dimensional parameter JSON")->required();
  synth->add_option("--months", syn.months)->capture_default_str();
  synth->add_option("--noise", syn.noise, "Lognormal noise sd for every series")->capture_default_str();
  synth->add_option("--start", syn.start, "First month, YYYY-MM")->capture_default_str();
  synth->add_option("--name", syn.name, "Output file stem")->capture_default_str();
  synth->add_flag("--all-herd", syn.all_herd, "Keep the herd every month instead of June/December only");
  synth->add_flag("--independent-supplies", syn.independent_supplies,
                  "Give new supplies their own noise instead of deriving them from the noisy flows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) return run_simulate(g, sim);
    if (*stability) return run_stability(g, stability_params);
    if (*regime) return run_regime_map(g, sweep_path, verify);
    if (*fit) return run_fit(g, fit_data, fit_config);
    if (*predict) return run_predict(g, pred_chains, pred_data, pred_draws);
    if (*validate_cmd) return run_validate(g, val_data);
    if (*synth) return run_synthesize(g, syn);
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bad_input;
  } catch (const load_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bad_input;
  } catch (const foodsys::domain_error& e) {
    std::cerr << "error: invalid parameters: " << e.what() << '\n';
    return bad_input;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bad_input;
  } catch (const sampler_error& e) {
    std::cerr << "error: sampler failed: " << e.what() << '\n';
    return computation_failed;
  } catch (const integration_error& e) {
    std::cerr << "error: integration failed: " << e.what() << '\n';
    return computation_failed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return computation_failed;
  }
  return bad_input;
}
