// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "hslab/applications.hpp"
#include "oracles.hpp"

namespace hslab {
namespace {

template <class P>
const P& record(const AppResult& r) {
  return std::get<P>(*r.model);
}

void expect_code(const std::function<void()>& f, const std::string& code) {
  try {
    f();
    ADD_FAILURE() << "expected error " << code;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

void expect_eigen_relation(const AppResult& r) {
  ASSERT_TRUE(r.model.has_value());
  const auto c = model_chain(*r.model, ScalarField::constant(1.0));
  EXPECT_LE(eigen_residual(c.base, c.pair0, residual_grid(*r.model)), 1e-9);
}

TEST(UtilityMap, HestonRecord) {
  const auto r = heston_utility_map({});
  const auto& p = record<CirParams>(r);
  EXPECT_NEAR(p.a, 1.85, 1e-15);
  EXPECT_NEAR(p.b, 0.08, 1e-15);
  EXPECT_NEAR(p.sigma, 0.3, 1e-15);
  EXPECT_NEAR(p.q, 0.5, 1e-15);
  EXPECT_EQ(r.wrap.objective, Objective::utility);
  EXPECT_NEAR(*r.growth_limit, -p.lambda(), 1e-15);
  expect_eigen_relation(r);
}

TEST(UtilityMap, GenericFactorMapAgreesWithCatalogRecords) {
  StochVolUtilitySpec s;
  s.r = 0.03;
  for (int j : {0, 1}) {
    if (j == 1) {
      s.k = 1.0;
      s.m = 1.0;
      s.xi = 1.0;
    }
    const auto generic = utility_factor_map(stoch_vol_factor_spec(s, j), s.xi);
    const auto cat = j == 0 ? heston_utility_map(s) : three_halves_utility_map(s);
    for (double x : residual_grid(*cat.model, 40)) {
      EXPECT_NEAR(generic.quadruple.drift(x), cat.quadruple.drift(x), 1e-12 * std::max(1.0, x * x));
      EXPECT_NEAR(generic.quadruple.sigma(x), cat.quadruple.sigma(x), 1e-12 * std::max(1.0, x * x));
      // the constant part of the discount rate moves into the wrapper
      EXPECT_NEAR(generic.quadruple.rate(x), cat.quadruple.rate(x) - cat.wrap.exp_rate, 1e-12 * std::max(1.0, x));
    }
    expect_eigen_relation(cat);
  }
}

TEST(UtilityMap, RisklessMarketIsDegenerate) {
  FactorSpec f;
  f.k = ScalarField::affine(1.0, -1.0);
  f.v = {ScalarField::constant(0.2)};
  f.theta = {ScalarField::constant(0.0)};
  f.nu = -2.0;
  const auto r = utility_factor_map(f, 1.0);
  for (double x : {0.1, 1.0, 5.0}) EXPECT_EQ(r.quadruple.rate(x), 0.0);
  EXPECT_DOUBLE_EQ(r.wrap.value(1.0), 1.0 / f.nu);
}

TEST(UtilityMap, BranchErrors) {
  FactorSpec f;
  f.k = ScalarField::constant(0.0);
  f.v = {ScalarField::constant(1.0)};
  f.theta = {ScalarField::constant(1.0)};
  f.nu = 0.5;
  expect_code([&] { utility_factor_map(f, 1.0); }, "branch");
  StochVolUtilitySpec s;
  s.nu = 0.0;
  expect_code([&] { heston_utility_map(s); }, "branch");
}

TEST(UtilityMap, CevRecordAndGrowth) {
  const auto r = utility_cev_map(0.08, 0.02, 0.2, 0.5, -1.0);
  const auto& p = record<CevParams>(r);
  EXPECT_NEAR(p.mu, 0.05, 1e-15);
  EXPECT_NEAR(p.q, 0.01125, 1e-15);
  EXPECT_EQ(p.theta, 0.0);
  EXPECT_NEAR(*r.growth_limit, -eigenvalues(p).lambda - (-1.0 * 0.02) / (-2.0), 1e-15);
  expect_eigen_relation(r);
  expect_code([] { utility_cev_map(0.05, 0.05, 0.2, 0.5, -1.0); }, "parameter-range");
}

TEST(EntropicMap, AffineRecord) {
  const auto r = entropic_affine_cp_map({});
  const auto& p = record<CirParams>(r);
  EXPECT_NEAR(p.b, 0.04, 1e-15);
  EXPECT_NEAR(p.a, 1.2, 1e-15);
  EXPECT_NEAR(p.sigma, 0.2, 1e-15);
  EXPECT_NEAR(p.q, 0.5, 1e-15);
  expect_eigen_relation(r);
  AffineCpSpec bad;
  bad.eta = {5.0};
  expect_code([&] { entropic_affine_cp_map(bad); }, "portfolio-range");
}

TEST(EntropicMap, ProportionRecordsAndRanges) {
  const auto r1 = entropic_cp1_map({});
  const auto& c = record<CirParams>(r1);
  EXPECT_NEAR(c.b, 1.09, 1e-15);
  EXPECT_NEAR(c.a, 0.482, 1e-15);
  EXPECT_NEAR(c.sigma, -0.3, 1e-15);
  EXPECT_NEAR(c.q, 0.0982, 1e-15);
  EXPECT_NEAR(r1.wrap.exp_rate, 0.2, 1e-15);
  expect_eigen_relation(r1);

  ThreeHalvesCpSpec s2;
  s2.eta = -0.5;
  const auto r2 = entropic_cp2_map(s2);
  const auto& t = record<ThreeHalvesParams>(r2);
  EXPECT_NEAR(t.a, 1.0 - 0.045, 1e-15);
  EXPECT_NEAR(t.b, 0.5, 1e-15);
  EXPECT_NEAR(t.q, 0.5 * (1.0 - 0.0225), 1e-15);
  expect_eigen_relation(r2);

  ThreeHalvesCpSpec bad;
  bad.eta = 10.0;
  expect_code([&] { entropic_cp1_map(bad); }, "portfolio-range");
  bad.eta = 0.1;
  expect_code([&] { entropic_cp2_map(bad); }, "portfolio-range");
  bad.nu = -1.0;
  expect_code([&] { entropic_cp1_map(bad); }, "branch");
}

TEST(EntropicMap, EmptyPortfolioHasZeroRisk) {
  ThreeHalvesCpSpec s;
  s.eta = 0.0;
  for (const auto& r : {entropic_cp1_map(s), entropic_cp2_map(s)}) {
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.wrap.value(r.u_closed(3.0)), 0.0);
  }
}

TEST(BondMap, LongYieldsAndShortMaturity) {
  const auto c = bond_map(CirParams{});
  EXPECT_NEAR(-*c.growth_limit, 0.7320508, 1e-7);
  const auto t = bond_map(ThreeHalvesParams{});
  EXPECT_NEAR(-*t.growth_limit, 0.5615528, 1e-7);
  EXPECT_NEAR(c.u_closed(1e-8), 1.0, 1e-7);
  EXPECT_NEAR(t.u_closed(1e-8), 1.0, 1e-7);
  CirParams p;
  p.q = 3.0;
  EXPECT_EQ(std::get<CirParams>(*bond_map(p).model).q, 1.0);
}

TEST(WrapperIdentity, HestonAgainstDirectSimulation) {
  const StochVolUtilitySpec s;
  const double T = 2.0;
  const auto r = heston_utility_map(s);
  const auto mc = oracle::utility_expectation_mc(s.k, s.m, s.v, s.rho, s.mu, s.nu, s.r, s.xi, 0, T, 40000, 400, 7);
  EXPECT_NEAR(r.u_closed(T), mc.mean, 3.0 * mc.se);
}

TEST(WrapperIdentity, EntropicAgainstDirectSimulation) {
  const double T = 2.0;
  const ThreeHalvesCpSpec s1;
  const auto m1 = oracle::entropic_cp1_mc(s1.k, s1.m, s1.v, s1.nu, s1.eta, s1.s0, T, 100000, 11);
  EXPECT_NEAR(entropic_cp1_map(s1).u_closed(T), m1.mean, 3.0 * m1.se);

  ThreeHalvesCpSpec s2;
  s2.eta = -0.5;
  const auto m2 = oracle::entropic_cp2_mc(s2.k, s2.m, s2.v, s2.nu, s2.eta, s2.s0, T, 20000, 400, 13);
  EXPECT_NEAR(entropic_cp2_map(s2).u_closed(T), m2.mean, 3.0 * m2.se);

  AffineCpSpec a;
  a.k = 1.0;
  a.m = 0.1;
  a.v = {0.1, 0.2};
  a.varsigma = {{1.0, 0.0}, {1.0, 1.0}};
  a.gamma = {1.0, 0.5};
  a.mu = {0.01, 0.02};
  a.eta = {0.2, 0.1};
  a.xi = 0.1;
  const auto ma = oracle::entropic_affine_mc(a.k, a.m, a.v, a.varsigma, a.gamma, a.mu, a.eta, a.nu, a.xi, T, 20000,
                                             400, 17);
  EXPECT_NEAR(entropic_affine_cp_map(a).u_closed(T), ma.mean, 3.0 * ma.se);
}

}  // namespace
}  // namespace hslab
