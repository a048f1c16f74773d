// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hslab/core.hpp"
#include "hslab/errors.hpp"
#include "hslab/models.hpp"

namespace hslab {

/// One-factor market: dX = k dt + v . dZ with d-dimensional Z, market price
/// of risk theta (d components), short rate r and risk aversion nu.
struct FactorSpec {
  ScalarField k;
  std::vector<ScalarField> v;
  std::vector<ScalarField> theta;
  ScalarField r = ScalarField::constant(0.0);
  double nu = -1.0;
  StateInterval domain = StateInterval::positive();
};

enum class Objective { utility, entropic, bond };

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::utility: return "utility";
    case Objective::entropic: return "entropic";
    case Objective::bond: return "bond";
  }
  return "unknown";
}

/// Scalar composition u_T = p_T exp(exp_rate T), followed by the objective:
/// u^{1-nu}/nu (utility), ln(u)/nu (entropic) or u itself (bond).
struct Wrapper {
  Objective objective = Objective::bond;
  double exp_rate = 0.0;
  double nu = 1.0;
  std::string description;

  double u(double p_T, double T) const { return p_T * std::exp(exp_rate * T); }
  double value(double u_T) const {
    switch (objective) {
      case Objective::utility: return std::pow(u_T, 1.0 - nu) / nu;
      case Objective::entropic: return std::log(u_T) / nu;
      case Objective::bond: return u_T;
    }
    return u_T;
  }
};

struct AppResult {
  std::string kind;
  std::optional<ModelParams> model;  // set when the problem lands in the catalog
  Quadruple quadruple;
  double xi = 1.0;
  Wrapper wrap;
  std::optional<double> growth_limit;  // lim (1/T) ln u_T
  bool degenerate = false;             // u_T identically 1

  /// u_T from the closed-form catalog price.
  double u_closed(double T) const {
    if (degenerate) return 1.0;
    if (!model) throw ContractError("app-closed-form", "mapped problem has no catalog closed form");
    return wrap.u(closed_price(*model, T), T);
  }
};

namespace detail {

inline void require_utility_branch(double nu) {
  if (!(nu < 0.0)) throw ParameterError("branch", "utility maximization needs risk aversion nu < 0");
}

inline void require_entropic_branch(double nu) {
  if (!(nu > 0.0)) throw ParameterError("branch", "entropic risk needs risk aversion nu > 0");
}

inline AppResult catalog_result(std::string kind, const ModelParams& m, Wrapper w) {
  AppResult r;
  r.kind = std::move(kind);
  r.model = m;
  r.quadruple = model_quadruple(m, ScalarField::constant(1.0));
  r.xi = initial_state(m);
  r.growth_limit = -eigenvalues(m).lambda + w.exp_rate;
  r.wrap = std::move(w);
  return r;
}

inline AppResult degenerate_result(std::string kind, double xi, Wrapper w) {
  AppResult r;
  r.kind = std::move(kind);
  r.quadruple.drift = ScalarField::constant(0.0);
  r.quadruple.sigma = ScalarField::constant(1.0);
  r.quadruple.rate = ScalarField::constant(0.0);
  r.quadruple.payoff = ScalarField::constant(1.0);
  r.xi = xi;
  w.exp_rate = 0.0;
  r.wrap = std::move(w);
  r.growth_limit = 0.0;
  r.degenerate = true;
  return r;
}

}  // namespace detail

/// Generic factor-model utility problem: quadruple
/// (k - nu/(nu-1) v.theta, |v|, -nu/(2(nu-1)^2)|theta|^2 + nu/(nu-1) r, 1).
inline AppResult utility_factor_map(const FactorSpec& s, double xi) {
  detail::require_utility_branch(s.nu);
  if (s.v.empty() || s.v.size() != s.theta.size())
    throw ContractError("factor-spec", "v and theta need the same nonzero number of components");
  const double nu = s.nu, c = nu / (nu - 1.0), c2 = nu / (2.0 * (nu - 1.0) * (nu - 1.0));
  const auto v = s.v, th = s.theta;
  const ScalarField k = s.k, r = s.r;
  AppResult out;
  out.kind = "utility-factor";
  out.quadruple.drift = ScalarField::value_only([=](double x) {
    double vt = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) vt += v[i](x) * th[i](x);
    return k(x) - c * vt;
  });
  out.quadruple.sigma = ScalarField::value_only([=](double x) {
    double s2 = 0.0;
    for (const auto& vi : v) s2 += vi(x) * vi(x);
    return std::sqrt(s2);
  });
  out.quadruple.rate = ScalarField::value_only([=](double x) {
    double t2 = 0.0;
    for (const auto& ti : th) t2 += ti(x) * ti(x);
    return -c2 * t2 + c * r(x);
  });
  out.quadruple.payoff = ScalarField::constant(1.0);
  out.quadruple.domain = s.domain;
  out.xi = xi;
  out.wrap = {Objective::utility, 0.0, nu, "max E[U(Pi_T)] = u_T^(1-nu)/nu with u_T = p_T"};
  return out;
}

/// Stochastic-volatility stock with factor drift k(m - x) x^j, factor
/// volatility v x^{j+1/2}, correlation rho and market price of risk mu sqrt(x);
/// j = 0 is the Heston case (CIR record), j = 1 the 3/2 case.
struct StochVolUtilitySpec {
  double k = 2.0;
  double m = 0.04;
  double v = 0.3;
  double rho = -0.5;
  double mu = 2.0;
  double nu = -1.0;
  double r = 0.0;
  double xi = 0.04;
};

inline AppResult heston_utility_map(const StochVolUtilitySpec& s) {
  detail::require_utility_branch(s.nu);
  const double c = s.nu / (s.nu - 1.0);
  CirParams p;
  p.a = s.k + c * s.v * s.rho * s.mu;
  p.b = s.k * s.m;
  p.sigma = s.v;
  p.q = -s.nu * s.mu * s.mu / (2.0 * (s.nu - 1.0) * (s.nu - 1.0));
  p.xi = s.xi;
  return detail::catalog_result("heston-utility", p,
                                {Objective::utility, -c * s.r, s.nu,
                                 "u_T = p_T exp(-nu r T/(nu-1)); max E[U(Pi_T)] = u_T^(1-nu)/nu"});
}

inline AppResult three_halves_utility_map(const StochVolUtilitySpec& s) {
  detail::require_utility_branch(s.nu);
  const double c = s.nu / (s.nu - 1.0);
  ThreeHalvesParams p;
  p.a = s.k + c * s.v * s.rho * s.mu;
  p.b = s.k * s.m;
  p.sigma = s.v;
  p.q = -s.nu * s.mu * s.mu / (2.0 * (s.nu - 1.0) * (s.nu - 1.0));
  p.xi = s.xi;
  return detail::catalog_result("three-halves-utility", p,
                                {Objective::utility, -c * s.r, s.nu,
                                 "u_T = p_T exp(-nu r T/(nu-1)); max E[U(Pi_T)] = u_T^(1-nu)/nu"});
}

/// Factor spec of the stochastic-volatility stock above, with a two-dimensional
/// driver (stock noise first).
inline FactorSpec stoch_vol_factor_spec(const StochVolUtilitySpec& s, int j) {
  FactorSpec f;
  const double k = s.k, m = s.m, v = s.v, rho = s.rho, mu = s.mu, pj = j + 0.5;
  f.k = ScalarField::value_only([=](double x) { return k * (m - x) * std::pow(x, j); });
  f.v = {ScalarField::value_only([=](double x) { return v * rho * std::pow(x, pj); }),
         ScalarField::value_only([=](double x) { return v * std::sqrt(1.0 - rho * rho) * std::pow(x, pj); })};
  f.theta = {ScalarField::value_only([=](double x) { return mu * std::sqrt(x); }), ScalarField::constant(0.0)};
  f.r = ScalarField::constant(s.r);
  f.nu = s.nu;
  return f;
}

/// CEV stock dS/S = k dt + sigma S^beta dB with constant rate r.
inline AppResult utility_cev_map(double k, double r, double sigma, double beta, double nu, double xi = 1.0) {
  detail::require_utility_branch(nu);
  CevParams p;
  p.mu = (nu * r - k) / (nu - 1.0);
  p.theta = 0.0;
  p.sigma = sigma;
  p.beta = beta;
  p.q = -(k - r) * (k - r) * nu / (2.0 * sigma * sigma * (nu - 1.0) * (nu - 1.0));
  p.xi = xi;
  p.variant = CevVariant::I;
  return detail::catalog_result("cev-utility", p,
                                {Objective::utility, -nu * r / (nu - 1.0), nu,
                                 "u_T = p_T exp(-nu r T/(nu-1)); max E[U(Pi_T)] = u_T^(1-nu)/nu"});
}

/// Constant-proportion portfolio eta in d stocks with drift mu_i + gamma_i x
/// and volatility sqrt(varsigma_ij x), on a square-root factor
/// dX = k(m - X) dt + sqrt(X) v . dZ.
struct AffineCpSpec {
  double k = 1.0;
  double m = 0.04;
  std::vector<double> v{0.2};
  std::vector<std::vector<double>> varsigma{{1.0}};
  std::vector<double> gamma{1.0};
  std::vector<double> mu{0.0};
  std::vector<double> eta{0.5};
  double nu = 2.0;
  double xi = 0.04;
};

/// Portfolio Pi = int pi dS of a single 3/2 stock dS = k(m - S) S dt + v S^{3/2} dZ,
/// with pi S^2 = eta (proportion I) or pi S = eta (proportion II).
struct ThreeHalvesCpSpec {
  double k = 1.0;
  double m = 0.5;
  double v = 0.3;
  double nu = 1.0;
  double eta = 0.2;
  double s0 = 1.0;
};

inline AppResult entropic_affine_cp_map(const AffineCpSpec& s) {
  detail::require_entropic_branch(s.nu);
  const std::size_t d = s.v.size();
  if (d == 0 || s.eta.size() != d || s.gamma.size() != d || s.mu.size() != d || s.varsigma.size() != d)
    throw ContractError("affine-cp", "v, eta, gamma, mu and varsigma need matching dimension");
  for (const auto& row : s.varsigma) {
    if (row.size() != d) throw ContractError("affine-cp", "varsigma must be square");
    for (double x : row)
      if (!(x >= 0.0)) throw ParameterError("parameter-range", "varsigma entries must be nonnegative");
  }
  Wrapper w{Objective::entropic, 0.0, s.nu, "u_T = p_T exp(-nu T sum eta_i mu_i); rho = ln(u_T)/nu"};
  bool empty = true;
  for (double e : s.eta) empty = empty && e == 0.0;
  if (empty) return detail::degenerate_result("entropic-affine-cp", s.xi, w);

  // Girsanov shift of the factor drift: nu sum_ij eta_i sqrt(varsigma_ij) v_j.
  double shift = 0.0, eg = 0.0, em = 0.0, vol2 = 0.0, v2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    eg += s.eta[i] * s.gamma[i];
    em += s.eta[i] * s.mu[i];
    v2 += s.v[i] * s.v[i];
  }
  for (std::size_t j = 0; j < d; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < d; ++i) col += s.eta[i] * std::sqrt(s.varsigma[i][j]);
    shift += col * s.v[j];
    vol2 += col * col;
  }
  CirParams p;
  p.b = s.m * s.k;
  p.a = s.k + s.nu * shift;
  p.sigma = std::sqrt(v2);
  p.q = s.nu * (eg - 0.5 * s.nu * vol2);
  p.xi = s.xi;
  if (!(p.q > 0.0)) {
    std::ostringstream os;
    os << "portfolio gives discount slope q=" << p.q << "; the mapping needs q > 0";
    throw ParameterError("portfolio-range", os.str());
  }
  w.exp_rate = -s.nu * em;
  return detail::catalog_result("entropic-affine-cp", p, w);
}

/// Proportion I lands on the square-root model for X = 1/S.
inline AppResult entropic_cp1_map(const ThreeHalvesCpSpec& s) {
  detail::require_entropic_branch(s.nu);
  Wrapper w{Objective::entropic, 0.0, s.nu, "u_T = p_T exp(nu k eta T); rho = ln(u_T)/nu"};
  if (s.eta == 0.0) return detail::degenerate_result("entropic-cp1", 1.0 / s.s0, w);
  const double hi = s.k * s.m / (s.nu * s.v * s.v);
  if (!(s.eta > 0.0 && s.eta < hi)) {
    std::ostringstream os;
    os << "proportion I needs 0 < eta < km/(nu v^2) = " << hi << ", got " << s.eta;
    throw ParameterError("portfolio-range", os.str());
  }
  CirParams p;
  p.b = s.k + s.v * s.v;
  p.a = s.k * s.m - s.nu * s.v * s.v * s.eta;
  p.sigma = -s.v;
  p.q = s.nu * s.eta * (s.k * s.m - 0.5 * s.nu * s.v * s.v * s.eta);
  p.xi = 1.0 / s.s0;
  w.exp_rate = s.nu * s.k * s.eta;
  return detail::catalog_result("entropic-cp1", p, w);
}

inline AppResult entropic_cp2_map(const ThreeHalvesCpSpec& s) {
  detail::require_entropic_branch(s.nu);
  Wrapper w{Objective::entropic, 0.0, s.nu, "u_T = p_T exp(-nu m k eta T); rho = ln(u_T)/nu"};
  if (s.eta == 0.0) return detail::degenerate_result("entropic-cp2", s.s0, w);
  const double lo = -s.k / (s.nu * s.v * s.v);
  if (!(s.eta > lo && s.eta < 0.0)) {
    std::ostringstream os;
    os << "proportion II needs -k/(nu v^2) = " << lo << " < eta < 0, got " << s.eta;
    throw ParameterError("portfolio-range", os.str());
  }
  ThreeHalvesParams p;
  p.a = s.k + s.nu * s.v * s.v * s.eta;
  p.b = s.k * s.m;
  p.sigma = s.v;
  p.q = -s.nu * s.eta * (s.k + 0.5 * s.nu * s.v * s.v * s.eta);
  p.xi = s.s0;
  w.exp_rate = -s.nu * s.m * s.k * s.eta;
  return detail::catalog_result("entropic-cp2", p, w);
}

/// Zero-coupon bond under a short-rate model r = X; growth_limit is minus the
/// long-term yield.
inline AppResult bond_map(const ModelParams& short_rate) {
  if (std::holds_alternative<CevParams>(short_rate))
    throw ContractError("bond-model", "bond pricing takes a CIR or 3/2 short-rate model");
  ModelParams m = with_param(short_rate, "q", 1.0);
  return detail::catalog_result("bond", m, {Objective::bond, 0.0, 1.0, "bond price P(0,T) = p_T"});
}

}  // namespace hslab
