// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>

#include <gtest/gtest.h>

#include "hslab/models.hpp"
#include "hslab/pde.hpp"
#include "hslab/sensitivity.hpp"

namespace hslab {
namespace {

PdeGrid cir_grid(int n, Coordinate c = Coordinate::log) {
  const auto [lo, hi] = stationary_range(CirParams{}, 0.0005, 0.9995);
  return PdeGrid::around(lo, hi, c, n, n);
}

TEST(PdeGrid, RejectsBadBounds) {
  PdeGrid g = cir_grid(100);
  g.n_x = 10;
  EXPECT_THROW(g.validate(StateInterval::positive()), ContractError);
  PdeGrid h = cir_grid(100);
  h.x_min = -1.0;
  h.coordinate = Coordinate::native;
  EXPECT_THROW(h.validate(StateInterval::positive()), ContractError);
}

TEST(SolveRemainder, ConstantDataIsPreserved) {
  const auto c = cir_chain(CirParams{});
  for (Coordinate co : {Coordinate::native, Coordinate::log}) {
    const auto s = solve_remainder(c.kappa, c.base.sigma, ScalarField::constant(1.0), c.base.domain, cir_grid(100, co),
                                   3.0);
    for (double v : s.values) EXPECT_NEAR(v, 1.0, 1e-10);
  }
}

// Edge nodes are linear extrapolations fixed by the boundary condition, so
// the bound is checked on the nodes the scheme solves for.
TEST(SolveRemainder, MaximumPrincipleWithoutPotential) {
  const auto c = cir_chain(CirParams{});
  const ScalarField init([](double x) { return std::tanh(x - 1.0); });
  for (Coordinate co : {Coordinate::native, Coordinate::log}) {
    const auto g = cir_grid(120, co);
    const auto s = solve_remainder(c.kappa, c.base.sigma, init, c.base.domain, g, 2.0);
    const double lo = std::tanh(g.x_min - 1.0), hi = std::tanh(g.x_max - 1.0);
    for (std::size_t k = 0; k <= s.n_t(); ++k) {
      for (std::size_t i = 1; i + 1 < s.n_x(); ++i) {
        EXPECT_GE(s.at(k, i), lo - 1e-8);
        EXPECT_LE(s.at(k, i), hi + 1e-8);
      }
    }
  }
}

TEST(SolveRemainder, CirMatchesClosedFormAndConvergesAtOrderTwo) {
  const CirParams p;
  const auto c = cir_chain(p);
  const double exact = cir_remainder_at(p, 2.0, 1.0);
  double prev = 0.0;
  for (int n : {100, 200, 400}) {
    const auto f = solve_remainder(c.kappa, c.base.sigma,
                                   ScalarField([&](double x) { return std::exp(p.eta() * x); }), c.base.domain,
                                   cir_grid(n), 2.0);
    const double err = std::abs(f.final_at(1.0) / exact - 1.0);
    if (n == 400) {
      EXPECT_LE(err, 1e-3);
    }
    if (prev > 0.0) {
      const double order = std::log2(prev / err);
      EXPECT_GE(order, 1.7) << n;
      EXPECT_LE(order, 2.3) << n;
    }
    prev = err;
  }
}

TEST(SolveFx, ZeroDataStaysZero) {
  const auto c = cir_chain(CirParams{});
  const auto s = solve_fx(c.hatted, ScalarField::constant(0.0), cir_grid(80), 2.0);
  for (double v : s.values) EXPECT_EQ(v, 0.0);
}

TEST(SolveFx, CirMatchesClosedFormAndDecaysAtAlpha) {
  const CirParams p;
  const auto c = cir_chain(p);
  const auto s = solve_fx(c.hatted, c.hatted.payoff, cir_grid(400), 4.0);
  const std::size_t half = s.n_t() / 2;
  EXPECT_NEAR(s.interpolate(half, 1.0) / cir_fx_closed(p, 2.0), 1.0, 1e-3);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = s.n_t() / 4; k <= s.n_t(); k += 10) pts.emplace_back(s.t_at(k), std::abs(s.interpolate(k, 1.0)));
  const RateFit fit = rate_fit(pts, {1.0, 4.0});
  EXPECT_NEAR(fit.rate / p.alpha(), 1.0, 0.05);
}

TEST(SolveFx, NonFiniteDataIsReported) {
  const auto c = cir_chain(CirParams{});
  const ScalarField bad([](double x) { return x > 5.0 ? std::numeric_limits<double>::infinity() : 1.0; });
  EXPECT_THROW(solve_fx(c.hatted, bad, cir_grid(60), 1.0), NumericError);
}

TEST(PdeSurface, CsvDump) {
  const auto c = cir_chain(CirParams{});
  const auto s = solve_remainder(c.kappa, c.base.sigma, ScalarField::constant(1.0), c.base.domain, cir_grid(50), 1.0);
  const std::string path = ::testing::TempDir() + "surface.csv";
  s.write_csv(path);
  std::FILE* f = std::fopen(path.c_str(), "r");
  ASSERT_NE(f, nullptr);
  char line[64];
  ASSERT_NE(std::fgets(line, sizeof line, f), nullptr);
  EXPECT_STREQ(line, "t,x,value\n");
  std::fclose(f);
}

}  // namespace
}  // namespace hslab
