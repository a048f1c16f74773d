// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/distributions/gamma.hpp>

#include "hslab/core.hpp"
#include "hslab/errors.hpp"
#include "hslab/special.hpp"

namespace hslab {

// ---------------------------------------------------------------------------
// Parameter records
// ---------------------------------------------------------------------------

/// Square-root short-rate factor dX = (b - a X) dt + sigma sqrt(X) dB with
/// discount r(x) = q x.
struct CirParams {
  double a = 1.0;
  double b = 1.0;
  double sigma = 1.0;
  double q = 1.0;
  double xi = 1.0;

  double alpha() const { return std::sqrt(a * a + 2.0 * q * sigma * sigma); }
  double eta() const { return (alpha() - a) / (sigma * sigma); }
  double lambda() const { return b * eta(); }

  void validate() const {
    if (!(std::isfinite(a) && std::isfinite(b) && std::isfinite(sigma) && std::isfinite(q) &&
          std::isfinite(xi)))
      throw ParameterError("non-finite", "CIR parameters must be finite");
    if (sigma == 0.0) throw ParameterError("parameter-range", "CIR sigma must be nonzero");
    if (!(a > 0.0)) throw ParameterError("parameter-range", "CIR mean reversion a must be positive");
    if (!(2.0 * b > sigma * sigma)) {
      std::ostringstream os;
      os << "Feller condition 2b > sigma^2 violated (b=" << b << ", sigma=" << sigma << ")";
      throw ParameterError("feller-violation", os.str());
    }
    if (!(q > 0.0)) throw ParameterError("parameter-range", "CIR discount slope q must be positive");
    if (!(xi > 0.0)) throw ParameterError("domain-violation", "CIR initial state must be positive");
  }
};

/// dX = (b - a X) X dt + sigma X^{3/2} dB with discount r(x) = q x.
struct ThreeHalvesParams {
  double a = 1.0;
  double b = 1.0;
  double sigma = 1.0;
  double q = 1.0;
  double xi = 1.0;

  double shifted_a() const { return a + 0.5 * sigma * sigma; }
  double root() const {
    const double A = shifted_a();
    return std::sqrt(A * A + 2.0 * q * sigma * sigma);
  }
  double eta() const { return (root() - shifted_a()) / (sigma * sigma); }
  double alpha() const { return a + sigma * sigma * eta(); }
  double lambda() const { return b * eta(); }

  void validate() const {
    if (!(std::isfinite(a) && std::isfinite(b) && std::isfinite(sigma) && std::isfinite(q) &&
          std::isfinite(xi)))
      throw ParameterError("non-finite", "3/2 parameters must be finite");
    if (sigma == 0.0) throw ParameterError("parameter-range", "3/2 sigma must be nonzero");
    if (!(a > -0.5 * sigma * sigma)) {
      std::ostringstream os;
      os << "3/2 model needs a > -sigma^2/2 (a=" << a << ", sigma=" << sigma << ")";
      throw ParameterError("domain-violation", os.str());
    }
    if (!(b > 0.0)) throw ParameterError("parameter-range", "3/2 level b must be positive");
    if (!(q > 0.0)) throw ParameterError("parameter-range", "3/2 discount slope q must be positive");
    if (!(xi > 0.0)) throw ParameterError("domain-violation", "3/2 initial state must be positive");
  }
};

enum class CevVariant { I, II };

/// dX/X = (mu - theta X^{2 beta}) dt + sigma X^beta dB with discount
/// q X^{-2 beta} (variant I) or q X^{2 beta} (variant II).
struct CevParams {
  double mu = 0.05;
  double theta = 0.0;
  double sigma = 0.2;
  double beta = 0.5;
  double xi = 1.0;
  double q = 0.01;
  CevVariant variant = CevVariant::I;

  void validate() const {
    if (!(std::isfinite(mu) && std::isfinite(theta) && std::isfinite(sigma) && std::isfinite(beta) &&
          std::isfinite(xi) && std::isfinite(q)))
      throw ParameterError("non-finite", "CEV parameters must be finite");
    if (!(mu > 0.0)) throw ParameterError("parameter-range", "CEV drift mu must be positive");
    if (!(theta >= 0.0)) throw ParameterError("parameter-range", "CEV damping theta must be >= 0");
    if (sigma == 0.0) throw ParameterError("parameter-range", "CEV sigma must be nonzero");
    if (!(beta > 0.0)) throw ParameterError("parameter-range", "CEV elasticity beta must be positive");
    if (!(q > 0.0)) throw ParameterError("parameter-range", "CEV discount slope q must be positive");
    if (!(xi > 0.0)) throw ParameterError("domain-violation", "CEV initial state must be positive");
  }
};

using ModelParams = std::variant<CirParams, ThreeHalvesParams, CevParams>;

/// Payoffs with closed forms: h = 1 everywhere, and h(x) = x (CIR only).
enum class Payoff { unit, linear };

inline void validate(const ModelParams& m) {
  std::visit([](const auto& p) { p.validate(); }, m);
}

inline double initial_state(const ModelParams& m) {
  return std::visit([](const auto& p) { return p.xi; }, m);
}

inline ScalarField payoff_field(Payoff h) {
  return h == Payoff::unit ? ScalarField::constant(1.0) : ScalarField::affine(0.0, 1.0);
}

// ---------------------------------------------------------------------------
// CIR closed forms
// ---------------------------------------------------------------------------

/// E[exp(beta X_T) | X_0 = x] for dX = (bhat - alpha X) dt + sigma sqrt(X) dB.
inline double cir_mgf(double bhat, double alpha, double sigma, double beta, double T, double x) {
  const double s2 = sigma * sigma;
  if (!(beta < 2.0 * alpha / s2)) {
    std::ostringstream os;
    os << "CIR transform needs beta < 2 alpha / sigma^2 (beta=" << beta << ")";
    throw DomainError("mgf-explosion", os.str());
  }
  if (T < 0.0) throw DomainError("negative-time", "cir_mgf needs T >= 0");
  const double E = std::exp(-alpha * T);
  const double c = s2 * (-std::expm1(-alpha * T)) / (2.0 * alpha);
  const double den = 1.0 - beta * c;
  return std::pow(1.0 / den, 2.0 * bhat / s2) * std::exp(beta * x * E / den);
}

inline double cir_log_mgf(double bhat, double alpha, double sigma, double beta, double T, double x) {
  const double s2 = sigma * sigma;
  if (!(beta < 2.0 * alpha / s2)) throw DomainError("mgf-explosion", "CIR transform explodes");
  const double E = std::exp(-alpha * T);
  const double c = s2 * (-std::expm1(-alpha * T)) / (2.0 * alpha);
  const double den = 1.0 - beta * c;
  return -(2.0 * bhat / s2) * std::log(den) + beta * x * E / den;
}

/// Remainder f(t, x) = E^{P-hat}[exp(eta X_t)] for h = 1.
inline double cir_remainder_at(const CirParams& p, double t, double x) {
  return cir_mgf(p.b, p.alpha(), p.sigma, p.eta(), t, x);
}

/// f_x(t, x) = eta E[exp(eta X-hat_t)] exp(-alpha t) under the hatted drift.
inline double cir_fx_at(const CirParams& p, double t, double x) {
  const double al = p.alpha();
  return p.eta() * cir_mgf(p.b + 0.5 * p.sigma * p.sigma, al, p.sigma, p.eta(), t, x) * std::exp(-al * t);
}

/// f_xx(t, x) = f g^2 with g = eta e^{-alpha t} / (1 - eta c(t)).
inline double cir_fxx_at(const CirParams& p, double t, double x) {
  const double al = p.alpha(), et = p.eta();
  const double c = p.sigma * p.sigma * (-std::expm1(-al * t)) / (2.0 * al);
  const double g = et * std::exp(-al * t) / (1.0 - et * c);
  return cir_remainder_at(p, t, x) * g * g;
}

inline double cir_price_closed(const CirParams& p, double T) {
  p.validate();
  const double et = p.eta();
  return std::exp(-et * p.xi - p.b * et * T) * cir_mgf(p.b, p.alpha(), p.sigma, et, T, p.xi);
}

inline double cir_fx_closed(const CirParams& p, double T) {
  p.validate();
  return cir_fx_at(p, T, p.xi);
}

// ---------------------------------------------------------------------------
// 3/2 closed forms
// ---------------------------------------------------------------------------

namespace detail {

struct ThreeHalvesMomentParts {
  double log_prefactor;  // log of Gamma ratio times the power factor
  double B;              // second Kummer parameter
  double c;              // (2b/sigma^2) / (e^{bT} - 1)
  double z;              // -c / x
};

inline ThreeHalvesMomentParts three_halves_parts(double alpha, double b, double sigma, double A, double T,
                                                 double x) {
  const double s2 = sigma * sigma;
  const double B = 2.0 * alpha / s2 + 2.0;
  const double k = 2.0 * b / s2;
  const double c = k / std::expm1(b * T);
  const double K1 = k / (-std::expm1(-b * T));
  return {std::lgamma(B - A) - std::lgamma(B) + A * std::log(K1), B, c, -c / x};
}

}  // namespace detail

/// E[X_T^A | X_0 = x] for dX = (b - alpha X) X dt + sigma X^{3/2} dB.
inline double three_halves_moment(double alpha, double b, double sigma, double A, double T, double x) {
  const double B = 2.0 * alpha / (sigma * sigma) + 2.0;
  if (!(A < B)) {
    std::ostringstream os;
    os << "3/2 moment of order " << A << " needs A < " << B;
    throw DomainError("moment-explosion", os.str());
  }
  if (!(x > 0.0)) throw DomainError("domain-violation", "3/2 moment needs x > 0");
  if (T < 0.0) throw DomainError("negative-time", "3/2 moment needs T >= 0");
  if (T == 0.0) return std::pow(x, A);
  if (A == 0.0) return 1.0;
  const auto parts = detail::three_halves_parts(alpha, b, sigma, A, T, x);
  if (A > 0.0) return std::exp(parts.log_prefactor + log_kummer_m(A, parts.B, parts.z));
  return std::exp(parts.log_prefactor) * kummer_m(A, parts.B, parts.z);
}

inline double three_halves_price_closed(const ThreeHalvesParams& p, double T) {
  p.validate();
  const double et = p.eta();
  return std::pow(p.xi, -et) * std::exp(-p.b * et * T) *
         three_halves_moment(p.alpha(), p.b, p.sigma, et, T, p.xi);
}

// ---------------------------------------------------------------------------
// CEV reduction
// ---------------------------------------------------------------------------

/// Result of mapping a CEV model onto CIR (variant I, Y = X^{-2 beta}) or
/// 3/2 (variant II, Y = X^{2 beta}).
struct CevReduction {
  std::variant<CirParams, ThreeHalvesParams> reduced;
  double exponent = 0.0;  // Y = X^exponent
  double y0 = 0.0;
  double dy0_dxi = 0.0;
  double d2y0_dxi2 = 0.0;
  std::string state_map;

  double y(double x) const { return std::pow(x, exponent); }
  double dy(double x) const { return exponent * std::pow(x, exponent - 1.0); }
  double d2y(double x) const { return exponent * (exponent - 1.0) * std::pow(x, exponent - 2.0); }
};

inline CevReduction cev_reduce(const CevParams& p) {
  p.validate();
  const double be = p.beta, s2 = p.sigma * p.sigma;
  CevReduction r;
  if (p.variant == CevVariant::I) {
    CirParams c;
    c.b = 2.0 * be * p.theta + be * (2.0 * be + 1.0) * s2;
    c.a = 2.0 * be * p.mu;
    c.sigma = -2.0 * be * p.sigma;
    c.q = p.q;
    r.exponent = -2.0 * be;
    c.xi = std::pow(p.xi, r.exponent);
    c.validate();
    r.reduced = c;
    r.state_map = "Y = X^(-2 beta), square-root model";
  } else {
    ThreeHalvesParams t;
    t.b = 2.0 * be * p.mu;
    t.a = 2.0 * be * p.theta - be * (2.0 * be - 1.0) * s2;
    t.sigma = 2.0 * be * p.sigma;
    t.q = p.q;
    r.exponent = 2.0 * be;
    t.xi = std::pow(p.xi, r.exponent);
    t.validate();
    r.reduced = t;
    r.state_map = "Y = X^(2 beta), 3/2 model";
  }
  r.y0 = r.y(p.xi);
  r.dy0_dxi = r.dy(p.xi);
  r.d2y0_dxi2 = r.d2y(p.xi);
  return r;
}

// ---------------------------------------------------------------------------
// Stationary ranges under the eigen-measure
// ---------------------------------------------------------------------------

/// [q_lo, q_hi] quantiles of the stationary law of X under the eigen-measure.
inline std::pair<double, double> stationary_range(const ModelParams& m, double q_lo, double q_hi) {
  struct V {
    double lo, hi;
    std::pair<double, double> operator()(const CirParams& p) const {
      // Gamma(2b/sigma^2, scale sigma^2/(2 alpha)) for drift b - alpha x.
      const double s2 = p.sigma * p.sigma;
      boost::math::gamma_distribution<double> g(2.0 * p.b / s2, s2 / (2.0 * p.alpha()));
      return {boost::math::quantile(g, lo), boost::math::quantile(g, hi)};
    }
    std::pair<double, double> operator()(const ThreeHalvesParams& p) const {
      // 1/X is square-root with drift (alpha + sigma^2) - b y.
      const double s2 = p.sigma * p.sigma;
      boost::math::gamma_distribution<double> g(2.0 * (p.alpha() + s2) / s2, s2 / (2.0 * p.b));
      return {1.0 / boost::math::quantile(g, hi), 1.0 / boost::math::quantile(g, lo)};
    }
    std::pair<double, double> operator()(const CevParams& p) const {
      const CevReduction r = cev_reduce(p);
      const ModelParams red = std::visit([](const auto& x) -> ModelParams { return x; }, r.reduced);
      const auto [ylo, yhi] = stationary_range(red, lo, hi);
      const double inv = 1.0 / r.exponent;
      const double x1 = std::pow(ylo, inv), x2 = std::pow(yhi, inv);
      return {std::min(x1, x2), std::max(x1, x2)};
    }
  };
  return std::visit(V{q_lo, q_hi}, m);
}

/// Interior check grid: n log-spaced points over the [0.001, 0.999]
/// stationary quantiles.
inline std::vector<double> residual_grid(const ModelParams& m, std::size_t n = 200) {
  const auto [lo, hi] = stationary_range(m, 0.001, 0.999);
  return spaced_grid(lo, hi, n);
}

// ---------------------------------------------------------------------------
// Quadruples and decomposition chains
// ---------------------------------------------------------------------------

namespace detail {

inline ScalarField sqrt_vol(double s) {
  const double as = std::abs(s);
  return ScalarField([as](double x) { return as * std::sqrt(x); },
                     [as](double x) { return 0.5 * as / std::sqrt(x); },
                     [as](double x) { return -0.25 * as / (x * std::sqrt(x)); });
}

inline ScalarField exp_field(double k) {  // e^{k x}
  return ScalarField([k](double x) { return std::exp(k * x); },
                     [k](double x) { return k * std::exp(k * x); },
                     [k](double x) { return k * k * std::exp(k * x); });
}

// Replaces generic chain fields by equivalent closed forms (faster in path
// loops) after checking agreement on the grid.
inline void override_field(ScalarField& target, const ScalarField& closed, const std::vector<double>& grid,
                           const char* name) {
  for (double x : grid) {
    const double g = target(x), c = closed(x);
    if (std::abs(g - c) > 1e-9 * std::max(1.0, std::abs(c))) {
      std::ostringstream os;
      os << "closed form for " << name << " disagrees with the derived field at x=" << x << " (" << c
         << " vs " << g << ")";
      throw InvariantError("chain-closed-form", os.str());
    }
  }
  target = closed;
}

}  // namespace detail

inline Quadruple cir_quadruple(const CirParams& p, const ScalarField& payoff) {
  p.validate();
  Quadruple q;
  q.drift = ScalarField::affine(p.b, -p.a);
  q.sigma = detail::sqrt_vol(p.sigma);
  q.rate = ScalarField::affine(0.0, p.q);
  q.payoff = payoff;
  q.domain = StateInterval::positive();
  q.sqrt_form = SquareRootForm{p.b, p.a, p.sigma};
  return q;
}

inline DecompositionChain cir_chain(const CirParams& p, const ScalarField& payoff) {
  const Quadruple q = cir_quadruple(p, payoff);
  const double al = p.alpha(), et = p.eta(), s2 = p.sigma * p.sigma;
  const auto grid = residual_grid(p);
  DecompositionChain c = build_chain(q, Eigenpair{p.lambda(), detail::exp_field(-et)},
                                     Eigenpair{al, ScalarField::constant(1.0)},
                                     Eigenpair{al, ScalarField::constant(1.0)}, grid);
  detail::override_field(c.kappa, ScalarField::affine(p.b, -al), grid, "kappa");
  detail::override_field(c.gamma, ScalarField::affine(p.b + 0.5 * s2, -al), grid, "gamma");
  detail::override_field(c.hatted.drift, ScalarField::affine(p.b + 0.5 * s2, -al), grid, "hatted drift");
  detail::override_field(c.hatted.rate, ScalarField::constant(al), grid, "hatted rate");
  detail::override_field(c.tilde.drift, ScalarField::affine(p.b + s2, -al), grid, "tilde drift");
  detail::override_field(c.tilde.rate, ScalarField::constant(al), grid, "tilde rate");
  c.eigen_sqrt_form = SquareRootForm{p.b, al, p.sigma};
  c.hatted.sqrt_form = SquareRootForm{p.b + 0.5 * s2, al, p.sigma};
  c.tilde.sqrt_form = SquareRootForm{p.b + s2, al, p.sigma};
  return c;
}

inline DecompositionChain cir_chain(const CirParams& p) { return cir_chain(p, ScalarField::constant(1.0)); }

inline Quadruple three_halves_quadruple(const ThreeHalvesParams& p, const ScalarField& payoff) {
  p.validate();
  const double a = p.a, b = p.b, as = std::abs(p.sigma), qq = p.q;
  Quadruple q;
  q.drift = ScalarField([=](double x) { return (b - a * x) * x; }, [=](double x) { return b - 2.0 * a * x; },
                        [=](double) { return -2.0 * a; });
  q.sigma = ScalarField::power(as, 1.5);
  q.rate = ScalarField::affine(0.0, qq);
  q.payoff = payoff;
  q.domain = StateInterval::positive();
  return q;
}

inline DecompositionChain three_halves_chain(const ThreeHalvesParams& p, const ScalarField& payoff) {
  const Quadruple q = three_halves_quadruple(p, payoff);
  const double al = p.alpha(), et = p.eta(), s2 = p.sigma * p.sigma, b = p.b;
  const auto grid = residual_grid(p);
  DecompositionChain c =
      build_chain(q, Eigenpair{p.lambda(), ScalarField::power(1.0, -et)},
                  Eigenpair{b, ScalarField::power(1.0, -2.0)}, Eigenpair{b, ScalarField::power(1.0, -2.0)}, grid);
  detail::override_field(c.kappa,
                         ScalarField([=](double x) { return (b - al * x) * x; },
                                     [=](double x) { return b - 2.0 * al * x; }, [=](double) { return -2.0 * al; }),
                         grid, "kappa");
  const double ah = al - 1.5 * s2;
  detail::override_field(c.hatted.drift, ScalarField([=](double x) { return (b - ah * x) * x; }), grid,
                         "hatted drift");
  detail::override_field(c.hatted.rate, ScalarField::affine(-b, 2.0 * al), grid, "hatted rate");
  const double at = al - s2;
  detail::override_field(c.tilde.drift, ScalarField([=](double x) { return (b - at * x) * x; }), grid,
                         "tilde drift");
  detail::override_field(c.tilde.rate, ScalarField::affine(-b, 2.0 * al + s2), grid, "tilde rate");
  return c;
}

inline DecompositionChain three_halves_chain(const ThreeHalvesParams& p) {
  return three_halves_chain(p, ScalarField::constant(1.0));
}

inline Quadruple cev_quadruple(const CevParams& p, const ScalarField& payoff) {
  p.validate();
  const double mu = p.mu, th = p.theta, be = p.beta, as = std::abs(p.sigma), qq = p.q;
  const double e = p.variant == CevVariant::I ? -2.0 * be : 2.0 * be;
  Quadruple q;
  q.drift = ScalarField([=](double x) { return mu * x - th * std::pow(x, 2.0 * be + 1.0); },
                        [=](double x) { return mu - th * (2.0 * be + 1.0) * std::pow(x, 2.0 * be); },
                        [=](double x) {
                          return -th * (2.0 * be + 1.0) * 2.0 * be * std::pow(x, 2.0 * be - 1.0);
                        });
  q.sigma = ScalarField::power(as, be + 1.0);
  q.rate = ScalarField::power(qq, e);
  q.payoff = payoff;
  q.domain = StateInterval::positive();
  return q;
}

/// Native-coordinate chain. With Y = X^e the eigenfunctions pull back as
/// phi(x) = phi_Y(y), phi-hat(x) = phi-hat_Y(y) |y'|, phi-tilde likewise.
inline DecompositionChain cev_chain(const CevParams& p, const ScalarField& payoff) {
  const Quadruple q = cev_quadruple(p, payoff);
  const CevReduction r = cev_reduce(p);
  const double be = p.beta;
  const auto grid = residual_grid(p);
  Eigenpair e0, e1, e2;
  if (p.variant == CevVariant::I) {
    const CirParams& c = std::get<CirParams>(r.reduced);
    const double ey = c.eta();
    const double k = 2.0 * be * ey;  // d/dx of -ey x^{-2 beta} is k x^{-2 beta - 1}
    e0.lambda = c.lambda();
    e0.phi = ScalarField(
        [=](double x) { return std::exp(-ey * std::pow(x, -2.0 * be)); },
        [=](double x) { return std::exp(-ey * std::pow(x, -2.0 * be)) * k * std::pow(x, -2.0 * be - 1.0); },
        [=](double x) {
          const double g = k * std::pow(x, -2.0 * be - 1.0);
          const double g1 = -k * (2.0 * be + 1.0) * std::pow(x, -2.0 * be - 2.0);
          return std::exp(-ey * std::pow(x, -2.0 * be)) * (g * g + g1);
        });
    e1 = Eigenpair{c.alpha(), ScalarField::power(1.0, -2.0 * be - 1.0)};
    e2 = e1;
  } else {
    const ThreeHalvesParams& t = std::get<ThreeHalvesParams>(r.reduced);
    e0 = Eigenpair{t.lambda(), ScalarField::power(1.0, -2.0 * be * t.eta())};
    e1 = Eigenpair{t.b, ScalarField::power(1.0, -2.0 * be - 1.0)};
    e2 = e1;
  }
  return build_chain(q, e0, e1, e2, grid);
}

inline DecompositionChain cev_chain(const CevParams& p) { return cev_chain(p, ScalarField::constant(1.0)); }

inline Quadruple model_quadruple(const ModelParams& m, const ScalarField& payoff) {
  struct V {
    const ScalarField& h;
    Quadruple operator()(const CirParams& p) const { return cir_quadruple(p, h); }
    Quadruple operator()(const ThreeHalvesParams& p) const { return three_halves_quadruple(p, h); }
    Quadruple operator()(const CevParams& p) const { return cev_quadruple(p, h); }
  };
  return std::visit(V{payoff}, m);
}

inline DecompositionChain model_chain(const ModelParams& m, const ScalarField& payoff) {
  struct V {
    const ScalarField& h;
    DecompositionChain operator()(const CirParams& p) const { return cir_chain(p, h); }
    DecompositionChain operator()(const ThreeHalvesParams& p) const { return three_halves_chain(p, h); }
    DecompositionChain operator()(const CevParams& p) const { return cev_chain(p, h); }
  };
  return std::visit(V{payoff}, m);
}

// ---------------------------------------------------------------------------
// Principal eigenvalues and parameter access
// ---------------------------------------------------------------------------

struct Eigenvalues {
  double lambda;
  double lambda_hat;
  double lambda_tilde;
};

inline Eigenvalues eigenvalues(const ModelParams& m) {
  struct V {
    Eigenvalues operator()(const CirParams& p) const { return {p.lambda(), p.alpha(), p.alpha()}; }
    Eigenvalues operator()(const ThreeHalvesParams& p) const { return {p.lambda(), p.b, p.b}; }
    Eigenvalues operator()(const CevParams& p) const {
      const CevReduction r = cev_reduce(p);
      const ModelParams red = std::visit([](const auto& x) -> ModelParams { return x; }, r.reduced);
      return eigenvalues(red);
    }
  };
  validate(m);
  return std::visit(V{}, m);
}

inline std::vector<std::string> parameter_names(const ModelParams& m) {
  if (std::holds_alternative<CevParams>(m)) return {"mu", "theta", "sigma", "beta", "q", "xi"};
  return {"a", "b", "sigma", "q", "xi"};
}

inline double& param_ref(ModelParams& m, const std::string& name) {
  if (auto* c = std::get_if<CirParams>(&m)) {
    if (name == "a") return c->a;
    if (name == "b") return c->b;
    if (name == "sigma") return c->sigma;
    if (name == "q") return c->q;
    if (name == "xi") return c->xi;
  } else if (auto* t = std::get_if<ThreeHalvesParams>(&m)) {
    if (name == "a") return t->a;
    if (name == "b") return t->b;
    if (name == "sigma") return t->sigma;
    if (name == "q") return t->q;
    if (name == "xi") return t->xi;
  } else if (auto* v = std::get_if<CevParams>(&m)) {
    if (name == "mu") return v->mu;
    if (name == "theta") return v->theta;
    if (name == "sigma") return v->sigma;
    if (name == "beta") return v->beta;
    if (name == "q") return v->q;
    if (name == "xi") return v->xi;
  }
  throw ContractError("unknown-parameter", "model has no parameter named '" + name + "'");
}

inline double get_param(const ModelParams& m, const std::string& name) {
  ModelParams copy = m;
  return param_ref(copy, name);
}

inline ModelParams with_param(const ModelParams& m, const std::string& name, double value) {
  ModelParams copy = m;
  param_ref(copy, name) = value;
  return copy;
}

// ---------------------------------------------------------------------------
// Sensitivity limits
// ---------------------------------------------------------------------------

struct SensitivityLimits {
  double delta_limit = 0.0;       // phi'/phi at xi
  double gamma_limit = 0.0;       // phi''/phi at xi
  double delta_rate = 0.0;        // lambda-hat
  double gamma_combo_rate = 0.0;  // lambda-hat + min(lambda-hat, lambda-tilde)
  double lambda = 0.0;
  std::map<std::string, double> param_limits;  // parameter -> -d lambda / d parameter
  std::vector<std::string> notes;
};

namespace detail {

// -d(lambda)/d(sigma) for lambda = L * (S - A)/sigma^2 where A = A0 + sigma^2/2
// and S = sqrt(A^2 + 2 q sigma^2); shared by the 3/2 and CEV-II families.
inline double shifted_root_sigma_limit(double L, double A, double S, double q, double sigma) {
  return -L * ((A + 2.0 * q - S) / (sigma * S) - 2.0 * (S - A) / (sigma * sigma * sigma));
}

}  // namespace detail

inline SensitivityLimits sensitivity_limits(const ModelParams& m) {
  validate(m);
  SensitivityLimits s;
  const Eigenvalues ev = eigenvalues(m);
  s.lambda = ev.lambda;
  s.delta_rate = ev.lambda_hat;
  s.gamma_combo_rate = ev.lambda_hat + std::min(ev.lambda_hat, ev.lambda_tilde);

  if (const auto* c = std::get_if<CirParams>(&m)) {
    const double al = c->alpha(), et = c->eta(), s2 = c->sigma * c->sigma, sg = c->sigma;
    s.delta_limit = -et;
    s.gamma_limit = et * et;
    s.param_limits["b"] = -et;
    s.param_limits["a"] = -(c->b / s2) * (c->a / al - 1.0);
    s.param_limits["sigma"] = -2.0 * c->b * (c->q / (al * sg) - (al - c->a) / (s2 * sg));
    s.param_limits["q"] = -c->b / al;
  } else if (const auto* t = std::get_if<ThreeHalvesParams>(&m)) {
    const double et = t->eta(), A = t->shifted_a(), S = t->root(), s2 = t->sigma * t->sigma, xi = t->xi;
    s.delta_limit = -et / xi;
    s.gamma_limit = et * (et + 1.0) / (xi * xi);
    s.param_limits["b"] = -et;
    s.param_limits["a"] = (t->b / s2) * (S - A) / S;
    s.param_limits["sigma"] = detail::shifted_root_sigma_limit(t->b, A, S, t->q, t->sigma);
    s.param_limits["q"] = -t->b / S;
  } else {
    const auto& v = std::get<CevParams>(m);
    const double be = v.beta, xi = v.xi, s2 = v.sigma * v.sigma, sg = v.sigma;
    if (v.variant == CevVariant::I) {
      const double R = std::sqrt(v.mu * v.mu + 2.0 * v.q * s2);
      const double ep = (R - v.mu) / s2;
      // phi = exp(-(ep / 2 beta) x^{-2 beta})
      const double l1 = ep * std::pow(xi, -2.0 * be - 1.0);
      s.delta_limit = l1;
      s.gamma_limit = l1 * l1 - ep * (2.0 * be + 1.0) * std::pow(xi, -2.0 * be - 2.0);
      s.param_limits["mu"] = (v.theta / s2 + be + 0.5) * (R - v.mu) / R;
      s.param_limits["theta"] = -ep;
      s.param_limits["sigma"] =
          -v.theta * (2.0 * v.q / (R * sg) - 2.0 * (R - v.mu) / (s2 * sg)) - (2.0 * be + 1.0) * v.q * sg / R;
      s.param_limits["beta"] = -(R - v.mu);
      s.param_limits["q"] = -(v.theta + (be + 0.5) * s2) / R;
    } else {
      const double A = v.theta + 0.5 * s2;
      const double S = std::sqrt(A * A + 2.0 * v.q * s2);
      const double ep = (S - A) / s2;
      s.delta_limit = -ep / xi;
      s.gamma_limit = ep * (ep + 1.0) / (xi * xi);
      s.param_limits["mu"] = -ep;
      s.param_limits["theta"] = (v.mu / s2) * (S - A) / S;
      s.param_limits["sigma"] = detail::shifted_root_sigma_limit(v.mu, A, S, v.q, sg);
      s.param_limits["beta"] = 0.0;
      s.param_limits["q"] = -v.mu / S;
      s.notes.push_back("beta enters only through the initial state; only boundedness of the beta sensitivity holds");
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Closed-form log-derivatives in the initial state
// ---------------------------------------------------------------------------

/// ln p_T and its first two xi-derivatives, plus the second-order combo
///   d2 - (ln phi)'' - (ln phi-hat)' (d1 - (ln phi)')
/// which decays at twice the hatted rate.
struct LogDerivatives {
  double log_price = 0.0;
  double d1 = 0.0;     // d/dxi ln p
  double d2 = 0.0;     // d^2/dxi^2 ln p
  double combo = 0.0;

  double price() const { return std::exp(log_price); }
  double delta() const { return d1; }          // p'/p
  double gamma() const { return d2 + d1 * d1; }  // p''/p
};

namespace detail {

inline LogDerivatives cir_log_derivatives(const CirParams& p, double T, Payoff h) {
  const double al = p.alpha(), et = p.eta(), s2 = p.sigma * p.sigma, xi = p.xi;
  const double E = std::exp(-al * T);
  const double c = s2 * (-std::expm1(-al * T)) / (2.0 * al);
  const double den = 1.0 - et * c;
  LogDerivatives d;
  d.log_price = -et * xi - p.b * et * T - (2.0 * p.b / s2) * std::log(den) + et * xi * E / den;
  d.d1 = -et + et * E / den;
  d.d2 = 0.0;
  if (h == Payoff::linear) {
    // f = M L with L = (2b/sigma^2) c/den + xi E/den^2, linear in xi.
    const double u = E / (den * den);
    const double L = (2.0 * p.b / s2) * c / den + xi * u;
    d.log_price += std::log(L);
    d.d1 += u / L;
    d.d2 = -(u / L) * (u / L);
  }
  d.combo = d.d2;  // (ln phi)'' = 0 and phi-hat is constant
  return d;
}

inline LogDerivatives three_halves_log_derivatives(const ThreeHalvesParams& p, double T) {
  const double et = p.eta(), xi = p.xi;
  LogDerivatives d;
  if (T == 0.0) {
    d.combo = et / (xi * xi);  // p = 1: -(ln phi)'' - (-2/xi)(0 + eta/xi)
    return d;
  }
  const double al = p.alpha();
  const auto parts = three_halves_parts(al, p.b, p.sigma, et, T, xi);
  const double B = parts.B, z = parts.z, c = parts.c;
  const double lm0 = log_kummer_m(et, B, z);
  const double r1 = (et / B) * std::exp(log_kummer_m(et + 1.0, B + 1.0, z) - lm0);
  const double r2 = et * (et + 1.0) / (B * (B + 1.0)) * std::exp(log_kummer_m(et + 2.0, B + 2.0, z) - lm0);
  const double x2 = xi * xi;
  const double F1 = r1 * c / x2;
  const double F2 = r2 * c * c / (x2 * x2) - 2.0 * r1 * c / (x2 * xi);
  d.log_price = -et * std::log(xi) - p.b * et * T + parts.log_prefactor + lm0;
  d.d1 = -et / xi + F1;
  d.d2 = et / x2 + F2 - F1 * F1;
  d.combo = (c * c / (x2 * x2)) * (r2 - r1 * r1);
  return d;
}

}  // namespace detail

inline LogDerivatives closed_log_derivatives(const ModelParams& m, double T, Payoff h = Payoff::unit) {
  validate(m);
  if (T < 0.0) throw DomainError("negative-time", "maturity must be nonnegative");
  if (h == Payoff::linear && !std::holds_alternative<CirParams>(m))
    throw ContractError("payoff-closed-form", "the linear payoff has a closed form only for the CIR model");
  if (const auto* c = std::get_if<CirParams>(&m)) return detail::cir_log_derivatives(*c, T, h);
  if (const auto* t = std::get_if<ThreeHalvesParams>(&m)) return detail::three_halves_log_derivatives(*t, T);
  const auto& v = std::get<CevParams>(m);
  const CevReduction r = cev_reduce(v);
  const LogDerivatives y = std::holds_alternative<CirParams>(r.reduced)
                               ? detail::cir_log_derivatives(std::get<CirParams>(r.reduced), T, h)
                               : detail::three_halves_log_derivatives(std::get<ThreeHalvesParams>(r.reduced), T);
  LogDerivatives d;
  const double y1 = r.dy0_dxi, y2 = r.d2y0_dxi2;
  d.log_price = y.log_price;
  d.d1 = y1 * y.d1;
  d.d2 = y1 * y1 * y.d2 + y2 * y.d1;
  d.combo = y1 * y1 * y.combo;
  return d;
}

inline double closed_price(const ModelParams& m, double T, Payoff h = Payoff::unit) {
  return closed_log_derivatives(m, T, h).price();
}

}  // namespace hslab
