#include <gtest/gtest.h>

#include <sstream>

#include "foodsys/io.hpp"
#include "support.hpp"

using namespace foodsys;

TEST(ParamsJson, DimensionalRoundTrip) {
  const auto truth = foodsys::testing::uk_truth();
  const auto j = to_json(truth.params, truth.init);
  const auto in = params_from_json(j);
  ASSERT_TRUE(std::holds_alternative<DimensionalInput>(in));
  EXPECT_EQ(to_json(in), j);
}

TEST(ParamsJson, DimensionlessWithDefaultStart) {
  const auto in = params_from_json(json::parse(
      R"({"alpha": 2.5, "beta": 0.165, "delta": 5, "omega": 10, "gamma": 26, "kappa": 0.5, "mu": 1, "rho": 1})"));
  const auto& n = std::get<DimensionlessInput>(in);
  EXPECT_EQ(n.params.alpha, 2.5);
  EXPECT_EQ(n.init, (Vec4{1, 1, 1, 1}));
}

TEST(ParamsJson, Rejections) {
  auto base = json::parse(
      R"({"alpha": 2.5, "beta": 0.165, "delta": 5, "omega": 10, "gamma": 26, "kappa": 0.5, "mu": 1, "rho": 1})");
  auto j = base;
  j["colour"] = 1;
  EXPECT_THROW(params_from_json(j), config_error);
  j = base;
  j["v0"] = 1;
  EXPECT_THROW(params_from_json(j), config_error);
  j = base;
  j.erase("rho");
  EXPECT_THROW(params_from_json(j), config_error);
  j = base;
  j["mu"] = "one";
  EXPECT_THROW(params_from_json(j), config_error);
  j = base;
  j["kappa"] = 1.5;
  EXPECT_THROW(params_from_json(j), foodsys::domain_error);
  EXPECT_THROW(params_from_json(json::array()), config_error);
  auto d = to_json(foodsys::testing::uk_means(), foodsys::testing::uk_equilibrium());
  d["alpha_typo"] = 1;
  EXPECT_THROW(params_from_json(d), config_error);
}

TEST(McmcJson, DefaultsAndRoundTrip) {
  const auto cfg = mcmc_config_from_json(json::object());
  EXPECT_EQ(cfg.sampler.n_chains, 4u);
  EXPECT_EQ(cfg.sampler.warmup, 2500u);
  const auto j = to_json(cfg);
  EXPECT_EQ(j["steps_per_iteration"], 4 * n_sampled);
  const auto again = mcmc_config_from_json(j);
  EXPECT_EQ(to_json(again), j);
}

TEST(McmcJson, Overrides) {
  const auto cfg = mcmc_config_from_json(json::parse(
      R"({"chains": 2, "draws": 100, "seed": 77, "transform_scales": {"q": 120}, "b": 150, "supplies_target": "state"})"));
  EXPECT_EQ(cfg.sampler.n_chains, 2u);
  EXPECT_EQ(cfg.sampler.seed, 77u);
  EXPECT_EQ(cfg.transform.scales[index_q], 120.0);
  EXPECT_EQ(cfg.transform.b, 150.0);
  EXPECT_EQ(cfg.supplies_target, SuppliesTarget::state);
}

TEST(McmcJson, Rejections) {
  for (const char* bad : {R"({"chain": 4})", R"({"chains": 1})", R"({"draws": 5})", R"({"target_accept": 1.5})",
                          R"({"transform_scales": {"k": 1}})", R"({"transform_scales": {"q": -1}})",
                          R"({"supplies_target": "outflow"})", R"({"b": 0})", R"({"chains": "four"})"})
    EXPECT_THROW(mcmc_config_from_json(json::parse(bad)), config_error) << bad;
}

TEST(SweepJson, RoundTripAndRejections) {
  const auto c = sweep_config_from_json(json::parse(R"({"kappa": {"steps": 7}, "betas": [0.1], "verify": true})"));
  EXPECT_EQ(c.grid.kappa_steps, 7u);
  EXPECT_TRUE(c.options.verify_by_simulation);
  EXPECT_EQ(c.sensitivity_multipliers.size(), 21u);
  EXPECT_EQ(to_json(sweep_config_from_json(to_json(c))), to_json(c));
  EXPECT_THROW(sweep_config_from_json(json::parse(R"({"kappa": {"stepz": 7}})")), config_error);
  EXPECT_THROW(sweep_config_from_json(json::parse(R"({"betas": []})")), config_error);
  EXPECT_THROW(sweep_config_from_json(json::parse(R"({"alpha": {"min": 2, "max": 1}})")), config_error);
}

TEST(Hash, IgnoresKeyOrderAndWhitespace) {
  const auto a = json::parse(R"({"b": 1, "a": [1, 2]})");
  const auto b = json::parse("{ \"a\" : [1,2],\n \"b\": 1 }");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(json::parse(R"({"a": [1, 2], "b": 2})")));
  EXPECT_EQ(config_hash(a).size(), 16u);
  EXPECT_EQ(hex64(fnv1a("")), "cbf29ce484222325");
  EXPECT_EQ(hex64(fnv1a("a")), "af63dc4c8601ec8c");
}

TEST(ChainsCsv, RoundTrip) {
  PosteriorChains pc;
  pc.transform.b = 141.0;
  pc.transform.scales[index_q] = 123.0;
  pc.seed = 99;
  const auto theta = pc.transform.to_unconstrained(foodsys::testing::uk_truth());
  for (std::size_t c = 0; c < 2; ++c) {
    pc.theta.emplace_back();
    pc.log_posterior.emplace_back();
    for (std::size_t i = 0; i < 3; ++i) {
      auto t = theta;
      t[0] += 0.01 * static_cast<double>(c * 3 + i);
      pc.theta.back().push_back(t);
      pc.log_posterior.back().push_back(-1000.0 - static_cast<double>(i));
    }
  }
  Metadata meta;
  meta.version = "test";
  meta.command = "fit";
  meta.seed = 99;
  std::stringstream io;
  write_chains_csv(io, pc, meta);
  const auto text = io.str();
  EXPECT_EQ(text.rfind("# tool: foodsys\n", 0), 0u);
  const auto f = read_chains_csv(io);
  EXPECT_EQ(f.metadata.at("command"), "fit");
  EXPECT_EQ(f.chains.seed, 99u);
  EXPECT_EQ(f.chains.transform.b, 141.0);
  EXPECT_EQ(f.chains.transform.scales, pc.transform.scales);
  ASSERT_EQ(f.chains.n_chains(), 2u);
  ASSERT_EQ(f.chains.n_draws(), 3u);
  EXPECT_EQ(f.chains.log_posterior, pc.log_posterior);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < n_sampled; ++k) EXPECT_NEAR(f.chains.theta[c][i][k], pc.theta[c][i][k], 1e-13);
}

TEST(ChainsCsv, Errors) {
  std::istringstream empty("# tool: foodsys\n");
  EXPECT_THROW(read_chains_csv(empty), load_error);
  std::istringstream wrong("chain,iteration,a\n");
  EXPECT_THROW(read_chains_csv(wrong), load_error);
  std::istringstream no_rows(chains_csv_header() + "\n");
  EXPECT_THROW(read_chains_csv(no_rows), load_error);
  std::istringstream short_row(chains_csv_header() + "\n0,0,1,2\n");
  EXPECT_THROW(read_chains_csv(short_row), load_error);
}

TEST(Metadata, PreambleAndJson) {
  Metadata m;
  m.version = "1.0";
  m.command = "simulate";
  m.config_hash = "abc";
  m.seed = 3;
  m.extra.push_back({"horizon", "120"});
  std::ostringstream out;
  m.write_csv_preamble(out);
  EXPECT_EQ(out.str(), "# tool: foodsys\n# version: 1.0\n# command: simulate\n# config_hash: abc\n# seed: 3\n# horizon: 120\n");
  EXPECT_EQ(m.to_json()["horizon"], "120");
}

TEST(Format, ComplexString) {
  EXPECT_EQ(complex_str({1.5, -2.0}), "1.5-2i");
  EXPECT_EQ(complex_str({0.0, 0.25}), "0+0.25i");
}
