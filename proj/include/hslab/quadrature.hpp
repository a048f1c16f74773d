// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hslab/errors.hpp"
#include "hslab/scalar_field.hpp"

namespace hslab {

struct QuadratureOptions {
  double abs_tol = 1e-8;
  double rel_tol = 1e-10;    // refinement target per panel
  double accept_rel = 1e-8;  // relative part of the final acceptance test
  unsigned max_depth = 24;   // hard cap: at most 2^max_depth panels
};

namespace detail {

struct Panel {
  double value, error, l1;
};

// One 7/15-point Gauss-Kronrod panel. Boost's rule reports its error in
// reference units, so the panel is mapped onto [-1, 1] and rescaled here.
template <class G>
Panel gk_panel(G& g, double lo, double hi) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  auto u = [&](double t) { return g(mid + half * t); };
  double e = 0.0, l = 0.0;
  const double v = GK::integrate(u, -1.0, 1.0, 0, 0.0, &e, &l);
  return {v * half, e * half, l * half};
}

// Bisects until each panel meets its share of the error budget or its own
// relative target.
template <class G>
Panel gk_adaptive(G& g, double lo, double hi, const Panel& p, double budget, unsigned depth,
                  const QuadratureOptions& opt) {
  if (depth >= opt.max_depth || p.error <= budget || p.error <= opt.rel_tol * std::abs(p.value)) return p;
  const double mid = 0.5 * (lo + hi);
  const Panel a = gk_adaptive(g, lo, mid, gk_panel(g, lo, mid), 0.5 * budget, depth + 1, opt);
  const Panel b = gk_adaptive(g, mid, hi, gk_panel(g, mid, hi), 0.5 * budget, depth + 1, opt);
  return {a.value + b.value, a.error + b.error, a.l1 + b.l1};
}

template <class G>
double gk_integrate(G&& g, double lo, double hi, const QuadratureOptions& opt, double* err, double* l1) {
  const Panel top = gk_panel(g, lo, hi);
  const Panel r = gk_adaptive(g, lo, hi, top, std::max(opt.abs_tol, opt.rel_tol * std::abs(top.value)), 0, opt);
  *err = r.error;
  *l1 = r.l1;
  return r.value;
}

}  // namespace detail

/// Adaptive 7/15-point Gauss-Kronrod on [a, b] with a finite-endpoint
/// logarithmic substitution when the interval spans several decades away
/// from a finite domain boundary. Throws QuadratureError when the error
/// estimate misses max(abs_tol, accept_rel * |I|) or the result is not finite.
template <class F>
double integrate(F&& f, double a, double b, const StateInterval& dom = StateInterval::real_line(),
                 const QuadratureOptions& opt = {}) {
  if (a == b) return 0.0;
  if (a > b) return -integrate(f, b, a, dom, opt);

  double err = 0.0;
  double l1 = 0.0;
  double value = 0.0;

  const bool lower_log = std::isfinite(dom.lower) && a > dom.lower &&
                         (b - dom.lower) / (a - dom.lower) > 10.0;
  const bool upper_log = !lower_log && std::isfinite(dom.upper) && b < dom.upper &&
                         (dom.upper - a) / (dom.upper - b) > 10.0;
  if (lower_log) {
    const double L = dom.lower;
    auto g = [&](double u) {
      const double e = std::exp(u);
      return f(L + e) * e;
    };
    value = detail::gk_integrate(g, std::log(a - L), std::log(b - L), opt, &err, &l1);
  } else if (upper_log) {
    const double U = dom.upper;
    auto g = [&](double u) {
      const double e = std::exp(u);
      return f(U - e) * e;
    };
    value = detail::gk_integrate(g, std::log(U - b), std::log(U - a), opt, &err, &l1);
  } else {
    value = detail::gk_integrate(f, a, b, opt, &err, &l1);
  }

  const double allowed = std::max(opt.abs_tol, opt.accept_rel * std::abs(value));
  if (!std::isfinite(value) || !(err <= allowed)) {
    std::ostringstream os;
    os << "quadrature on [" << a << ", " << b << "] did not converge: value=" << value
       << " error-estimate=" << err << " allowed=" << allowed
       << " (possible non-integrable singularity inside the truncation)";
    throw QuadratureError("quadrature-nonconvergence", os.str());
  }
  return value;
}

}  // namespace hslab
