#include <gtest/gtest.h>

#include <complex>
#include <random>

#include "foodsys/stability.hpp"
#include "support.hpp"

using namespace foodsys;

namespace {

double det4(const Mat4& m, std::complex<double> lambda) {
  std::complex<double> a[4][4];
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a[i][j] = m[i][j] - (i == j ? lambda : 0.0);
  std::complex<double> det = 1.0;
  for (int c = 0; c < 4; ++c) {
    int piv = c;
    for (int r = c + 1; r < 4; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) == 0.0) return 0.0;
    if (piv != c) {
      std::swap(a[piv], a[c]);
      det = -det;
    }
    det *= a[c][c];
    for (int r = c + 1; r < 4; ++r) {
      const auto f = a[r][c] / a[c][c];
      for (int k = c; k < 4; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return std::abs(det);
}

double frobenius(const Mat4& m) {
  double s = 0.0;
  for (const auto& row : m)
    for (double v : row) s += v * v;
  return std::sqrt(s);
}

FixedPoint find(const std::vector<FixedPoint>& fps, FixedPointKind k) {
  for (const auto& fp : fps)
    if (fp.kind == k) return fp;
  throw std::runtime_error("fixed point not found");
}

} // namespace

// q=160, b=140, e=0.033, a=0.2, w=0.33, s=1, k=0.5.
TEST(Ratios, ReferenceCurveValue) {
  const double expected = (160.0 / 140.0) * (1.65 + 2.5) / (0.5 * 5.0 * 1.165);
  EXPECT_NEAR(critical_ratio(sensitivity_reference()), expected, 1e-12);
  EXPECT_NEAR(expected, 1.6284488, 1e-7);
}

TEST(Ratios, UkMeansPlugIn) {
  const auto p = foodsys::testing::uk_means();
  EXPECT_NEAR(critical_ratio(p), 1.7101, 1e-4);
  EXPECT_NEAR(surplus_ratio(p), 0.61598, 1e-5);
  const auto nd = nondimensionalise(p, foodsys::testing::uk_equilibrium());
  EXPECT_NEAR(critical_ratio(nd.params), critical_ratio(p), 1e-12);
  const auto ck = critical_trade_strength(nd.params);
  EXPECT_NEAR(ck.kappa, surplus_ratio(p), 1e-12);
  EXPECT_TRUE(ck.reachable);
}

TEST(Ratios, UndefinedWithoutTrade) {
  DimensionlessParams p{1, 0.1, 1, 1, 1, 0.0, 1, 1};
  EXPECT_THROW(critical_ratio(p), foodsys::domain_error);
  EXPECT_FALSE(critical_trade_strength(DimensionlessParams{3, 0.1, 1, 10, 1, 0.5, 1, 1}).reachable);
}

TEST(FixedPoints, ResidualsVanish) {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = foodsys::testing::random_params(rng);
    for (const auto& fp : fixed_points(p)) {
      if (!fp.exists) continue;
      const auto r = rhs_dimensionless_where_defined(fp.state, p);
      for (int i = 0; i < 4; ++i)
        if (r[i]) worst = std::max(worst, std::abs(*r[i]));
    }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(FixedPoints, KappaZeroGivesOriginAndInterior) {
  DimensionlessParams p{1.5, 0.2, 2, 1, 3, 0.0, 1, 1};
  const auto fps = fixed_points(p);
  ASSERT_EQ(fps.size(), 2u);
  EXPECT_EQ(fps[0].kind, FixedPointKind::origin);
  EXPECT_TRUE(fps[0].singular);
  const auto& in = find(fps, FixedPointKind::no_trade_interior);
  EXPECT_NEAR(in.state[1], 1.5 / 1.2, 1e-15);
  EXPECT_NEAR(in.state[0], 1.5 * (2 + 3) / (2 * 2 * 1.2), 1e-15);
}

TEST(FixedPoints, SustainableExistsOnlyAboveCriticalRatio) {
  DimensionlessParams p{0.5, 0.165, 5, 10, 26, 0.8, 1, 1};
  EXPECT_LT(critical_ratio(p), 1.0);
  EXPECT_FALSE(find(fixed_points(p), FixedPointKind::sustainable_domestic).exists);
  p.alpha = 2.5;
  p.kappa = 0.5;
  EXPECT_GT(critical_ratio(p), 1.0);
  EXPECT_TRUE(find(fixed_points(p), FixedPointKind::sustainable_domestic).exists);
}

TEST(FixedPoints, RejectsInvalid) {
  EXPECT_THROW(fixed_points(DimensionlessParams{-1, 0.1, 1, 1, 1, 0.5, 1, 1}), foodsys::domain_error);
  EXPECT_THROW(fixed_points(DimensionlessParams{1, 0.1, 1, 1, 1, 1.5, 1, 1}), foodsys::domain_error);
}

TEST(Eigen, OriginLimitEigenvalues) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = foodsys::testing::random_params(rng);
    p.kappa = 0.0;
    const auto rep = stability_report(fixed_points(p).front(), p);
    ASSERT_EQ(rep.eigenvalues.size(), 4u);
    std::vector<double> expected{-(1 + p.beta), -p.omega, -p.mu, -p.rho};
    std::sort(expected.rbegin(), expected.rend());
    for (int i = 0; i < 4; ++i) {
      EXPECT_NEAR(rep.eigenvalues[i].real(), expected[i], 1e-10);
      EXPECT_NEAR(rep.eigenvalues[i].imag(), 0.0, 1e-10);
    }
  }
}

TEST(Eigen, LeadingEigenvalueAtUnsustainablePoint) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = foodsys::testing::random_params(rng);
    const auto& fp = find(fixed_points(p), FixedPointKind::unsustainable_domestic);
    const auto ev = eigenvalues(jacobian_dimensionless(fp.state, p));
    const double lambda1 = p.alpha * (p.omega + p.gamma / 2) / (p.kappa * p.gamma) - 1 - p.beta;
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& z : ev) nearest = std::min(nearest, std::abs(z - lambda1));
    EXPECT_LT(nearest, 1e-8 * std::max(1.0, std::abs(lambda1)));
  }
}

TEST(Eigen, DeterminantResidual) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = foodsys::testing::random_params(rng);
    const auto J = jacobian_dimensionless({u(rng), u(rng), u(rng), u(rng)}, p);
    const double scale = std::pow(frobenius(J), 4);
    for (const auto& z : eigenvalues(J)) EXPECT_LT(det4(J, z), 1e-8 * scale);
  }
}

TEST(Eigen, SortedByRealPart) {
  Mat4 m{};
  m[0] = {-3, 0, 0, 0};
  m[1] = {0, 1, 0, 0};
  m[2] = {0, 0, 0, -2};
  m[3] = {0, 0, 2, 0};
  const auto ev = eigenvalues(m);
  EXPECT_DOUBLE_EQ(ev[0].real(), 1.0);
  EXPECT_NEAR(ev[1].imag(), 2.0, 1e-12);
  EXPECT_NEAR(ev[2].imag(), -2.0, 1e-12);
  EXPECT_DOUBLE_EQ(ev[3].real(), -3.0);
  m[0][0] = std::nan("");
  EXPECT_THROW(eigenvalues(m), foodsys::domain_error);
}

// The cubic's roots are the remaining three eigenvalues of the Jacobian.
TEST(RouthHurwitz, CubicMatchesJacobian) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = foodsys::testing::random_params(rng);
    const auto& fp = find(fixed_points(p), FixedPointKind::unsustainable_domestic);
    const auto c = unsustainable_cubic(p);
    const double lambda1 = unsustainable_leading_eigenvalue(p);
    for (const auto& z : eigenvalues(jacobian_dimensionless(fp.state, p))) {
      if (std::abs(z - lambda1) < 1e-9 * std::max(1.0, std::abs(lambda1))) continue;
      const auto value = z * z * z + c.c2 * z * z + c.c1 * z + c.c0;
      const double size = std::abs(z * z * z) + c.c2 * std::abs(z * z) + c.c1 * std::abs(z) + c.c0;
      EXPECT_LT(std::abs(value), 1e-9 * size);
    }
    const bool rh = routh_hurwitz_stable_cubic(c.c2, c.c1, c.c0);
    const auto ev = eigenvalues(jacobian_dimensionless(fp.state, p));
    bool cubic_stable = true;
    for (const auto& z : ev)
      if (std::abs(z - lambda1) > 1e-9 * std::max(1.0, std::abs(lambda1)) && z.real() >= 0) cubic_stable = false;
    EXPECT_EQ(rh, cubic_stable);
  }
}

// Small omega and mu with large rho break c2 c1 > c0: a Hopf pair crosses at the
// unsustainable point even though the critical ratio is below one.
TEST(RouthHurwitz, CounterexampleToAlwaysHolding) {
  const DimensionlessParams p{0.1, 0.1, 1, 0.1, 1, 0.5, 0.01, 10};
  EXPECT_NEAR(critical_ratio(p), 0.10909090909, 1e-10);
  const auto c = unsustainable_cubic(p);
  EXPECT_FALSE(routh_hurwitz_stable_cubic(c.c2, c.c1, c.c0));
  const auto& fp = find(fixed_points(p), FixedPointKind::unsustainable_domestic);
  const auto rep = stability_report(fp, p);
  EXPECT_EQ(rep.verdict, Verdict::unstable);
  EXPECT_GT(rep.eigenvalues[0].real(), 0.0);
  EXPECT_GT(std::abs(rep.eigenvalues[0].imag()), 0.0);
  EXPECT_FALSE(find(fixed_points(p), FixedPointKind::sustainable_domestic).exists);
}

// With the cubic Routh-Hurwitz stable, the critical ratio decides which domestic
// equilibrium attracts. Above one the sustainable point can still lose stability, but only
// through a complex pair.
TEST(RouthHurwitz, CriticalRatioSelectsEquilibrium) {
  std::mt19937_64 rng(23);
  int below = 0, above = 0, oscillatory = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto p = foodsys::testing::random_params(rng);
    const auto c = unsustainable_cubic(p);
    const double cr = critical_ratio(p);
    if (!routh_hurwitz_stable_cubic(c.c2, c.c1, c.c0) || std::abs(cr - 1) < 1e-6) continue;
    const auto fps = fixed_points(p);
    const auto un = stability_report(find(fps, FixedPointKind::unsustainable_domestic), p);
    const auto& sus_fp = find(fps, FixedPointKind::sustainable_domestic);
    if (cr < 1) {
      ++below;
      EXPECT_TRUE(un.stable);
      EXPECT_FALSE(sus_fp.exists);
      continue;
    }
    ++above;
    ASSERT_TRUE(sus_fp.exists);
    EXPECT_FALSE(un.stable);
    const auto sus = stability_report(sus_fp, p);
    if (sus.verdict != Verdict::unstable) continue;
    ++oscillatory;
    EXPECT_GT(std::abs(sus.eigenvalues.front().imag()), 1e-9) << "alpha=" << p.alpha << " kappa=" << p.kappa;
  }
  EXPECT_GT(below, 100);
  EXPECT_GT(above, 100);
  EXPECT_LT(oscillatory, above);
}

TEST(RouthHurwitz, SustainableStableForPanelValues) {
  const DimensionlessParams p{2.5, 0.165, 5, 10, 26, 0.5, 1, 1};
  EXPECT_TRUE(stability_report(find(fixed_points(p), FixedPointKind::sustainable_domestic), p).stable);
}

TEST(Report, ReturnTimeFromLeadingEigenvalue) {
  const DimensionlessParams p{2.5, 0.165, 5, 10, 26, 0.5, 1, 1};
  const auto rep = stability_report(find(fixed_points(p), FixedPointKind::sustainable_domestic), p);
  ASSERT_TRUE(rep.stable);
  ASSERT_TRUE(rep.return_time);
  EXPECT_DOUBLE_EQ(*rep.return_time, -1.0 / rep.eigenvalues.front().real());
}

TEST(Report, ImportsOnlyPointUsesProbe) {
  const DimensionlessParams p{2.5, 0.165, 5, 10, 26, 0.5, 1, 1};
  const auto& fp = find(fixed_points(p), FixedPointKind::imports_only_trivial);
  EXPECT_NEAR(fp.state[1], 0.5 * 26 / 10, 1e-15);
  const auto rep = stability_report(fp, p);
  EXPECT_EQ(rep.method, "simulation probe");
  EXPECT_FALSE(rep.jacobian);
  EXPECT_EQ(rep.verdict, Verdict::unstable);
}

TEST(Report, RequiresExistingPoint) {
  const DimensionlessParams p{0.5, 0.165, 5, 10, 26, 0.8, 1, 1};
  EXPECT_THROW(stability_report(find(fixed_points(p), FixedPointKind::sustainable_domestic), p), usage_error);
}

TEST(Regime, Classification) {
  DimensionlessParams p{0.5, 0.165, 5, 10, 26, 0.8, 1, 1};
  EXPECT_EQ(classify_regime(p).kind, RegimeKind::unsustainable);
  p = {1.2, 0.165, 5, 10, 26, 0.5, 1, 1};
  EXPECT_EQ(classify_regime(p).kind, RegimeKind::sustainable_net_importer);
  p = {2.5, 0.165, 5, 10, 26, 0.5, 1, 1};
  EXPECT_EQ(classify_regime(p).kind, RegimeKind::sustainable_net_exporter);
  EXPECT_THROW(classify_regime(DimensionlessParams{1, 0.1, 1, 1, 1, 0.0, 1, 1}), foodsys::domain_error);
}

TEST(Regime, InvariantUnderJointPriceRescaling) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> c(0.1, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto d = foodsys::testing::uk_means();
    const auto s = foodsys::testing::uk_equilibrium();
    d.k = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    d.q *= c(rng) / 3;
    const auto before = classify_regime(nondimensionalise(d, s).params);
    const double scale = c(rng);
    d.q *= scale;
    d.b *= scale;
    const auto after = classify_regime(nondimensionalise(d, s).params);
    EXPECT_EQ(before.kind, after.kind);
    EXPECT_NEAR(before.critical_ratio, after.critical_ratio, 1e-12 * before.critical_ratio);
  }
}

TEST(RegimeMap, SmallGridAgreesWithSimulation) {
  RegimeGrid g;
  g.kappa_steps = 6;
  g.alpha_steps = 6;
  RegimeMapOptions opt;
  opt.verify_by_simulation = true;
  opt.threads = 2;
  const auto cells = regime_map(g, opt);
  ASSERT_EQ(cells.size(), 3u * 36u);
  for (const auto& c : cells) {
    ASSERT_TRUE(c.agreement);
    if (!c.regime.boundary) {
      EXPECT_TRUE(*c.agreement) << c.kappa << " " << c.alpha << " " << c.beta;
    }
  }
  EXPECT_NEAR(cells[1].kappa, cells[0].kappa + (g.kappa_max - g.kappa_min) / 5, 1e-15);
  EXPECT_NEAR(cells[6].alpha, cells[0].alpha + (g.alpha_max - g.alpha_min) / 5, 1e-15);
}

TEST(RegimeMap, OutputIndependentOfThreads) {
  RegimeGrid g;
  g.kappa_steps = 5;
  g.alpha_steps = 4;
  RegimeMapOptions opt;
  opt.verify_by_simulation = true;
  opt.threads = 1;
  const auto a = regime_map(g, opt);
  opt.threads = 3;
  const auto b = regime_map(g, opt);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].kappa, b[i].kappa);
    EXPECT_EQ(a[i].simulated, b[i].simulated);
    EXPECT_EQ(a[i].attractor_distance, b[i].attractor_distance);
  }
}

TEST(Sensitivity, RatioScalesAsExpected) {
  const auto ref = sensitivity_reference();
  const std::vector<double> mult{0.5, 1.0, 1.5};
  const auto q = sensitivity_curve(ref, mult, "q");
  EXPECT_NEAR(q[0].critical_ratio, 0.5 * q[1].critical_ratio, 1e-12);
  EXPECT_NEAR(q[2].critical_ratio, 1.5 * q[1].critical_ratio, 1e-12);
  const auto k = sensitivity_curve(ref, mult, "k");
  EXPECT_NEAR(k[0].critical_ratio, 2.0 * k[1].critical_ratio, 1e-12);
  const auto b = sensitivity_curve(ref, mult, "b");
  EXPECT_GT(b[0].critical_ratio, b[2].critical_ratio);
  EXPECT_THROW(sensitivity_curve(ref, mult, "h"), usage_error);
  EXPECT_THROW(sensitivity_curve(ref, {0.0}, "q"), foodsys::domain_error);
}
