// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "hslab/errors.hpp"
#include "hslab/quadrature.hpp"
#include "hslab/scalar_field.hpp"

namespace hslab {

/// Declares that a diffusion is of square-root type: drift b - a x and
/// volatility |sigma| sqrt(x) on (0, inf). Enables the exact CIR sampler.
struct SquareRootForm {
  double b = 0.0;
  double a = 0.0;
  double sigma = 0.0;
};

/// Drift and volatility of a one-dimensional diffusion on an interval.
struct Dynamics {
  ScalarField drift;
  ScalarField sigma;
  StateInterval domain;
  std::optional<SquareRootForm> sqrt_form;
};

/// Pricing problem p_T = E[exp(-int r(X)) h(X_T)] for dX = b dt + sigma dB.
struct Quadruple {
  ScalarField drift;
  ScalarField sigma;
  ScalarField rate;
  ScalarField payoff;
  StateInterval domain;
  std::optional<SquareRootForm> sqrt_form;

  Dynamics dynamics() const { return {drift, sigma, domain, sqrt_form}; }

  /// Checks sigma > 0 and finite coefficients on the sampled points.
  void validate(const std::vector<double>& grid) const {
    for (double x : grid) {
      domain.require_interior(x, "validation point");
      const double s = sigma(x);
      if (!(s > 0.0) || !std::isfinite(s)) {
        std::ostringstream os;
        os << "diffusion coefficient must be positive, got " << s << " at x=" << x;
        throw InvariantError("nonpositive-diffusion", os.str());
      }
      if (!std::isfinite(drift(x)) || !std::isfinite(rate(x)) || !std::isfinite(payoff(x))) {
        std::ostringstream os;
        os << "non-finite coefficient at x=" << x;
        throw InvariantError("nonfinite-coefficient", os.str());
      }
    }
  }
};

struct Eigenpair {
  double lambda = 0.0;
  ScalarField phi;
  bool positive = true;

  void require_positive(const std::vector<double>& grid) const {
    for (double x : grid) {
      const double v = phi(x);
      if (!(v > 0.0)) {
        std::ostringstream os;
        os << "eigenfunction not positive at x=" << x << " (value " << v << ")";
        throw InvariantError("nonpositive-eigenfunction", os.str());
      }
    }
  }
};

/// (1/2) sigma^2 f'' + b f' - r f at an interior point.
inline double apply_generator(const Quadruple& q, const ScalarField& f, double x) {
  q.domain.require_interior(x);
  const double s = q.sigma(x);
  return 0.5 * s * s * f.d2(x) + q.drift(x) * f.d1(x) - q.rate(x) * f(x);
}

/// max over the grid of |L phi + lambda phi| / max(1, |phi|).
inline double eigen_residual(const Quadruple& q, const Eigenpair& e, const std::vector<double>& grid) {
  if (grid.empty()) throw ContractError("empty-grid", "eigen_residual needs a nonempty grid");
  double worst = 0.0;
  for (double x : grid) {
    const double phi = e.phi(x);
    const double r = std::abs(apply_generator(q, e.phi, x) + e.lambda * phi) / std::max(1.0, std::abs(phi));
    worst = std::max(worst, r);
  }
  return worst;
}

/// n points spread over [lo, hi]; log-spaced when both ends are positive.
inline std::vector<double> spaced_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(lo < hi)) throw ContractError("grid-spec", "spaced_grid needs n >= 2 and lo < hi");
  std::vector<double> g(n);
  const bool logs = lo > 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    g[i] = logs ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))) : lo + t * (hi - lo);
  }
  return g;
}

/// The three quadruples of the decomposition together with their
/// principal eigenpairs and the drift transforms kappa and gamma.
struct DecompositionChain {
  Quadruple base;
  Eigenpair pair0;
  ScalarField kappa;
  Quadruple hatted;
  Eigenpair pair1;
  ScalarField gamma;
  Quadruple tilde;
  Eigenpair pair2;
  std::optional<SquareRootForm> eigen_sqrt_form;

  /// Dynamics of X under the eigen-measure (drift kappa).
  Dynamics eigen_dynamics() const { return {kappa, base.sigma, base.domain, eigen_sqrt_form}; }

  /// Largest pointwise gap between stored kappa/gamma and values recomputed
  /// from b, sigma, phi, phi-hat.
  double rederivation_gap(const std::vector<double>& grid) const {
    double gap = 0.0;
    for (double x : grid) {
      const double s = base.sigma(x);
      const double k = base.drift(x) + s * s * pair0.phi.d1(x) / pair0.phi(x);
      const double g = k + base.sigma.d1(x) * s + s * s * pair1.phi.d1(x) / pair1.phi(x);
      gap = std::max({gap, std::abs(k - kappa(x)), std::abs(g - gamma(x))});
    }
    return gap;
  }
};

/// Builds kappa, the hatted and tilde quadruples, and checks the three
/// eigen-relations on `grid` to `tol` (skipped when tol is not positive).
inline DecompositionChain build_chain(const Quadruple& q, const Eigenpair& pair0, const Eigenpair& pair1,
                                      const Eigenpair& pair2, const std::vector<double>& grid,
                                      double tol = 1e-9) {
  pair0.require_positive(grid);
  pair1.require_positive(grid);
  pair2.require_positive(grid);

  const ScalarField b = q.drift, s = q.sigma, h = q.payoff;
  const ScalarField phi = pair0.phi, psi = pair1.phi;

  auto lphi1 = [phi](double x) { return phi.d1(x) / phi(x); };
  auto lphi2 = [phi](double x) { return phi.d2(x) / phi(x); };
  auto lpsi1 = [psi](double x) { return psi.d1(x) / psi(x); };
  auto lpsi2 = [psi](double x) { return psi.d2(x) / psi(x); };

  auto kappa_v = [=](double x) {
    const double sx = s(x);
    return b(x) + sx * sx * lphi1(x);
  };
  auto kappa_d1 = [=](double x) {
    const double sx = s(x), l1 = lphi1(x);
    return b.d1(x) + 2.0 * sx * s.d1(x) * l1 + sx * sx * (lphi2(x) - l1 * l1);
  };
  // (sigma sigma')' = sigma'^2 + sigma sigma''
  auto ss_d1 = [=](double x) {
    const double s1 = s.d1(x);
    return s1 * s1 + s(x) * s.d2(x);
  };
  auto gamma_v = [=](double x) {
    const double sx = s(x);
    return kappa_v(x) + s.d1(x) * sx + sx * sx * lpsi1(x);
  };
  auto gamma_d1 = [=](double x) {
    const double sx = s(x), m1 = lpsi1(x);
    return kappa_d1(x) + ss_d1(x) + 2.0 * sx * s.d1(x) * m1 + sx * sx * (lpsi2(x) - m1 * m1);
  };
  // u = (h/phi)'
  auto u_v = [=](double x) { return (h.d1(x) - h(x) * lphi1(x)) / phi(x); };
  auto u_d1 = [=](double x) {
    const double l1 = lphi1(x);
    return (h.d2(x) - 2.0 * h.d1(x) * l1 - h(x) * lphi2(x) + 2.0 * h(x) * l1 * l1) / phi(x);
  };
  // w = (u/psi)'
  auto w_v = [=](double x) { return (u_d1(x) - u_v(x) * lpsi1(x)) / psi(x); };

  DecompositionChain c;
  c.base = q;
  c.pair0 = pair0;
  c.pair1 = pair1;
  c.pair2 = pair2;
  c.kappa = ScalarField(kappa_v, kappa_d1);
  c.gamma = ScalarField(gamma_v, gamma_d1);

  c.hatted.drift = ScalarField([=](double x) { return kappa_v(x) + s.d1(x) * s(x); },
                               [=](double x) { return kappa_d1(x) + ss_d1(x); });
  c.hatted.sigma = s;
  c.hatted.rate = ScalarField([=](double x) { return -kappa_d1(x); });
  c.hatted.payoff = ScalarField(u_v, u_d1);
  c.hatted.domain = q.domain;

  c.tilde.drift = ScalarField([=](double x) { return gamma_v(x) + s.d1(x) * s(x); },
                              [=](double x) { return gamma_d1(x) + ss_d1(x); });
  c.tilde.sigma = s;
  c.tilde.rate = ScalarField([=](double x) { return -gamma_d1(x); });
  c.tilde.payoff = ScalarField(w_v);
  c.tilde.domain = q.domain;

  if (tol > 0.0) {
    const double r0 = eigen_residual(q, pair0, grid);
    const double r1 = eigen_residual(c.hatted, pair1, grid);
    const double r2 = eigen_residual(c.tilde, pair2, grid);
    if (r0 > tol || r1 > tol || r2 > tol) {
      std::ostringstream os;
      os << "eigen-relation residuals (" << r0 << ", " << r1 << ", " << r2 << ") exceed " << tol;
      throw InvariantError("eigen-residual", os.str());
    }
  }
  return c;
}

struct MartingaleIntegrals {
  double left = 0.0;
  double right = 0.0;
  // natural logarithms, finite even when left or right overflow to inf
  double log_left = 0.0;
  double log_right = 0.0;
};

/// Truncated versions of the two scale/speed double integrals whose joint
/// divergence characterizes the martingale property of the eigen-measure
/// density. With I(x) = int_{x0}^x 2 kappa / sigma^2,
///   left  = int_{a}^{x0} sigma^-2(x) e^{-I(x)} int_x^{x0} e^{I(y)} dy dx
///   right = int_{x0}^{b} sigma^-2(x) e^{-I(x)} int_{x0}^x e^{I(y)} dy dx.
inline MartingaleIntegrals martingale_criterion(const ScalarField& kappa, const ScalarField& sigma,
                                                const StateInterval& domain, double x0,
                                                std::pair<double, double> trunc,
                                                const QuadratureOptions& opt = {}) {
  const auto [a, b] = trunc;
  domain.require_interior(a, "lower truncation");
  domain.require_interior(b, "upper truncation");
  domain.require_interior(x0, "reference point");
  if (!(a < x0 && x0 < b))
    throw ContractError("truncation-order", "martingale_criterion needs a < x0 < b");

  // A single outward sweep from x0 carries H = e^{-I} int_{x0}^x e^{I} and
  // the outer integral K, with H' = 1 - H 2 kappa / sigma^2 and
  // K' = |H| / sigma^2. This avoids overflowing exponentials and the stalls of
  // nested adaptive quadrature on wide truncations.
  const bool log_lower = std::isfinite(domain.lower);
  const bool log_upper = !log_lower && std::isfinite(domain.upper);
  auto to_x = [&](double u) {
    return log_lower ? domain.lower + std::exp(u) : log_upper ? domain.upper - std::exp(-u) : u;
  };
  auto to_u = [&](double x) {
    return log_lower ? std::log(x - domain.lower) : log_upper ? -std::log(domain.upper - x) : x;
  };
  using State = std::array<double, 2>;
  // (H, K) are stored divided by e^{log_scale}; forcing is e^{-log_scale}.
  double forcing = 1.0;
  auto rhs = [&](const State& y, State& dy, double u) {
    const double x = to_x(u);
    const double jac = log_lower ? x - domain.lower : log_upper ? domain.upper - x : 1.0;
    const double sg = sigma(x), s2 = sg * sg;
    dy[0] = jac * (forcing - y[0] * 2.0 * kappa(x) / s2);
    dy[1] = jac * std::abs(y[0]) / s2;
  };
  auto sweep = [&](double end) {
    namespace ode = boost::numeric::odeint;
    constexpr int kPieces = 4096;
    constexpr double kRescale = 1e50;
    State y{0.0, 0.0};
    double log_scale = 0.0;
    forcing = 1.0;
    const double u0 = to_u(x0), u1 = to_u(end), du = (u1 - u0) / kPieces;
    auto stepper = ode::make_controlled(opt.abs_tol * 1e-4, opt.rel_tol, ode::runge_kutta_dopri5<State>());
    for (int i = 0; i < kPieces; ++i) {
      const double ua = u0 + i * du, ub = i + 1 == kPieces ? u1 : ua + du;
      ode::integrate_adaptive(stepper, rhs, y, ua, ub, 1e-2 * du);
      if (!std::isfinite(y[0]) || !std::isfinite(y[1])) {
        std::ostringstream os;
        os << "martingale integral towards " << end << " left double range near x=" << to_x(ub);
        throw QuadratureError("quadrature-nonconvergence", os.str());
      }
      if (std::max(std::abs(y[0]), std::abs(y[1])) > kRescale) {
        y[0] /= kRescale;
        y[1] /= kRescale;
        log_scale += std::log(kRescale);
        forcing = std::exp(-log_scale);
      }
    }
    return std::log(std::abs(y[1])) + log_scale;
  };
  MartingaleIntegrals out;
  out.log_left = sweep(a);
  out.log_right = sweep(b);
  out.left = std::exp(out.log_left);
  out.right = std::exp(out.log_right);
  return out;
}

}  // namespace hslab
