// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "hslab/sensitivity.hpp"

namespace hslab {
namespace {

std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> g;
  for (double t = lo; t <= hi + 1e-12; t += step) g.push_back(t);
  return g;
}

std::vector<std::pair<double, double>> errors_against(const std::vector<CurvePoint>& c, double limit) {
  std::vector<std::pair<double, double>> e;
  for (const auto& p : c) e.emplace_back(p.T, std::abs(p.value - limit));
  return e;
}

TEST(RateFit, ExactExponential) {
  std::vector<std::pair<double, double>> e;
  for (int t = 1; t <= 5; ++t) e.emplace_back(t, 2.0 * std::exp(-1.5 * t));
  const RateFit f = rate_fit(e, {1.0, 5.0});
  EXPECT_NEAR(f.rate, 1.5, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(2.0), 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_FALSE(f.low_confidence);
}

TEST(RateFit, Errors) {
  EXPECT_THROW(rate_fit({{1, 1.0}, {2, 0.0}, {3, 1.0}, {4, 1.0}}, {0, 5}), ContractError);
  EXPECT_THROW(rate_fit({{1, 1.0}, {2, 0.5}, {3, 0.2}}, {0, 5}), ContractError);
  std::vector<std::pair<double, double>> noisy{{1, 1.0}, {2, 3.0}, {3, 0.5}, {4, 2.0}, {5, 1.0}};
  EXPECT_TRUE(rate_fit(noisy, {0, 6}).low_confidence);
}

TEST(BoundednessStat, SyntheticSeries) {
  const double lim = -0.7;
  std::vector<std::pair<double, double>> a, b;
  for (double T = 5; T <= 40; T += 1) {
    a.emplace_back(T, lim + 0.3 / T);
    b.emplace_back(T, lim + std::log(T) / T);
  }
  const auto sa = boundedness_stat(a, lim);
  EXPECT_NEAR(sa.sup, 0.3, 1e-12);
  EXPECT_NEAR(sa.trend_slope, 0.0, 1e-12);
  EXPECT_FALSE(sa.unbounded);
  const auto sb = boundedness_stat(b, lim);
  EXPECT_GT(sb.trend_slope, 0.0);
  EXPECT_TRUE(sb.unbounded);
}

TEST(DeltaCurve, ClosedFormLimitsAndRates) {
  const CirParams p;
  const auto c = delta_curve(p, {30.0}, Method::closed);
  EXPECT_NEAR(c[0].value, -0.7320508, 1e-6);
  const auto cur = delta_curve(p, grid(2, 12, 0.5), Method::closed);
  const RateFit f = rate_fit(errors_against(cur, -p.eta()));
  EXPECT_NEAR(f.rate / p.alpha(), 1.0, 0.05);
  EXPECT_GE(f.r_squared, 0.999);

  const ThreeHalvesParams t;
  EXPECT_NEAR(delta_curve(t, {20.0}, Method::closed)[0].value, -0.5615528, 1e-4);
  const RateFit g = rate_fit(errors_against(delta_curve(t, grid(2, 12, 0.5), Method::closed), -t.eta()));
  EXPECT_NEAR(g.rate / t.b, 1.0, 0.05);
}

TEST(DeltaCurve, MethodsAgree) {
  MethodSettings s;
  s.n_paths = 20000;
  s.steps_per_unit = 50;
  const std::vector<ModelParams> models{CirParams{}, ThreeHalvesParams{}};
  for (const auto& m : models) {
    const auto cl = delta_curve(m, {1.0, 2.0}, Method::closed);
    const auto mc = delta_curve(m, {1.0, 2.0}, Method::mc, s);
    const auto pd = delta_curve(m, {1.0, 2.0}, Method::pde, s);
    for (std::size_t i = 0; i < cl.size(); ++i) {
      ASSERT_TRUE(mc[i].std_error.has_value());
      EXPECT_FALSE(pd[i].std_error.has_value());
      EXPECT_NEAR(mc[i].value, cl[i].value, std::max(3.0 * *mc[i].std_error, 1e-3));
      EXPECT_NEAR(pd[i].value, cl[i].value, 1e-3);
    }
  }
}

TEST(GammaCurve, ClosedFormLimitAndComboRates) {
  const CirParams p;
  const auto g = gamma_curve(p, {30.0}, Method::closed);
  EXPECT_NEAR(g.second[0].value, 0.5358984, 1e-5);
  const auto lin = gamma_curve(p, grid(2, 8, 0.25), Method::closed, {}, Payoff::linear);
  const RateFit f = rate_fit(errors_against(lin.combo, 0.0), {2, 8});
  EXPECT_NEAR(f.rate / (2.0 * p.alpha()), 1.0, 0.10);

  const ThreeHalvesParams t;
  const auto gt = gamma_curve(t, grid(2, 8, 0.25), Method::closed);
  const RateFit ft = rate_fit(errors_against(gt.combo, 0.0), {2, 8});
  EXPECT_NEAR(ft.rate / (2.0 * t.b), 1.0, 0.10);
}

TEST(GammaCurve, PdeAgreesAndMcWarns) {
  const CirParams p;
  const auto cl = gamma_curve(p, {2.0}, Method::closed, {}, Payoff::linear);
  const auto pd = gamma_curve(p, {2.0}, Method::pde, {}, Payoff::linear);
  EXPECT_NEAR(pd.second[0].value, cl.second[0].value, 1e-3);
  EXPECT_NEAR(pd.combo[0].value, cl.combo[0].value, 1e-3);
  MethodSettings s;
  s.n_paths = 2000;
  s.steps_per_unit = 20;
  const auto mc = gamma_curve(p, {1.0}, Method::mc, s);
  EXPECT_FALSE(mc.warnings.empty());
}

TEST(ParamCurve, CirLimits) {
  const CirParams p;
  const auto lim = sensitivity_limits(p);
  EXPECT_NEAR(param_curve(p, "b", {40.0})[0].value, -p.eta(), 2e-2);
  EXPECT_NEAR(param_curve(p, "a", {40.0})[0].value, 0.4226497, 2e-2);
  EXPECT_NEAR(lim.param_limits.at("a"), 0.4226497, 1e-7);
}

CevParams unit_cev(CevVariant v) {
  CevParams c;
  c.mu = 1.0;
  c.theta = v == CevVariant::I ? 0.5 : 1.0;
  c.sigma = 1.0;
  c.beta = 0.5;
  c.q = 1.0;
  c.variant = v;
  return c;
}

void expect_bounded(const ModelParams& m, const std::vector<std::string>& names, const std::vector<double>& T) {
  const auto lim = sensitivity_limits(m);
  for (const auto& n : names) {
    std::vector<std::pair<double, double>> v;
    for (const auto& pt : param_curve(m, n, T)) v.emplace_back(pt.T, pt.value);
    const auto b = boundedness_stat(v, lim.param_limits.at(n));
    EXPECT_FALSE(b.unbounded) << n << " slope " << b.trend_slope;
    EXPECT_TRUE(std::isfinite(b.sup));
  }
}

TEST(ParamCurve, BoundednessOverCatalog) {
  const auto T = grid(5, 40, 1);
  expect_bounded(CirParams{}, {"b", "a", "sigma"}, T);
  expect_bounded(ThreeHalvesParams{}, {"b", "a", "sigma"}, T);
  expect_bounded(unit_cev(CevVariant::I), {"mu", "theta", "sigma", "beta"}, T);
  expect_bounded(unit_cev(CevVariant::II), {"mu", "theta", "sigma"}, T);
}

// With a hatted eigenvalue near 0.05 the 1/T regime starts only once
// lambda_hat T is of order a few units, so the horizon is scaled accordingly.
TEST(ParamCurve, SlowCevSetsAreBoundedOnScaledHorizon) {
  CevParams c1;
  c1.mu = 0.05;
  c1.sigma = 0.2;
  c1.q = 0.01125;
  CevParams c2 = c1;
  c2.variant = CevVariant::II;
  c2.theta = 0.1;
  c2.q = 0.2;
  const auto T = grid(50, 400, 10);
  expect_bounded(c1, {"mu", "theta", "sigma", "beta"}, T);
  expect_bounded(c2, {"mu", "theta", "sigma"}, T);
}

TEST(ParamCurve, VanishingDiscountGivesZeroCurve) {
  CirParams p;
  p.q = 1e-14;
  for (const auto& pt : param_curve(p, "b", {1.0, 5.0, 20.0})) EXPECT_NEAR(pt.value, 0.0, 1e-6);
}

TEST(Feps, ZeroMaturityAndBumpOracle) {
  const CirParams p;
  PathConfig cfg;
  cfg.n_paths = 20000;
  cfg.scheme = Scheme::cir_exact;
  EXPECT_EQ(feps_representation(p, 0.0, cfg).mean, 0.0);
  for (const std::string param : {"b", "a", "sigma"}) {
    const double T = 3.0;
    cfg.n_steps = 60;
    const auto e = feps_representation(p, T, cfg, param);
    const double bump = bump_derivative(
        [&](double v) {
          CirParams q = p;
          if (param == "b") q.b = v;
          if (param == "a") q.a = v;
          if (param == "sigma") q.sigma = v;
          return cir_remainder_at(q, T, q.xi);
        },
        get_param(p, param), 1e-5);
    EXPECT_NEAR(e.mean, bump, 3.0 * e.std_error + 1e-4) << param;
  }
}

}  // namespace
}  // namespace hslab
