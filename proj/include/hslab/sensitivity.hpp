// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hslab/models.hpp"
#include "hslab/montecarlo.hpp"
#include "hslab/pde.hpp"

namespace hslab {

enum class Method { closed, mc, pde };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::closed: return "closed";
    case Method::mc: return "mc";
    case Method::pde: return "pde";
  }
  return "?";
}

struct CurvePoint {
  double T = 0.0;
  double value = 0.0;
  std::optional<double> std_error;  // present exactly for Monte Carlo points
  Method method = Method::closed;
};

struct RateFit {
  double rate = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::pair<double, double> window{2.0, 12.0};
  std::size_t points = 0;
  bool low_confidence = false;  // r^2 < 0.9
};

/// Least squares of ln e on T over points inside the window; rate = -slope.
inline RateFit rate_fit(const std::vector<std::pair<double, double>>& errors,
                        std::pair<double, double> window = {2.0, 12.0}) {
  std::vector<double> t, y;
  for (const auto& [T, e] : errors) {
    if (!(e > 0.0)) throw ContractError("rate-fit-nonpositive", "rate_fit needs strictly positive errors");
    if (T >= window.first && T <= window.second) {
      t.push_back(T);
      y.push_back(std::log(e));
    }
  }
  if (t.size() < 4) throw ContractError("rate-fit-points", "rate_fit needs at least 4 points inside the window");
  const double n = static_cast<double>(t.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= n;
  my /= n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    sty += (t[i] - mt) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  RateFit f;
  const double slope = sty / stt;
  f.rate = -slope;
  f.intercept = my - slope * mt;
  f.r_squared = syy > 0.0 ? std::clamp(sty * sty / (stt * syy), 0.0, 1.0) : 1.0;
  f.window = window;
  f.points = t.size();
  f.low_confidence = f.r_squared < 0.9;
  return f;
}

struct BoundednessStat {
  double sup = 0.0;
  double trend_slope = 0.0;
  bool unbounded = false;  // trend_slope above the tolerance
};

/// Transforms a curve v(T) into s(T) = T |v(T) - limit| and returns its
/// supremum and the least-squares slope over the second half of the points.
inline BoundednessStat boundedness_stat(const std::vector<std::pair<double, double>>& values, double limit,
                                        double slope_tol = 0.02) {
  if (values.size() < 4) throw ContractError("boundedness-points", "boundedness_stat needs at least 4 points");
  std::vector<std::pair<double, double>> s;
  BoundednessStat b;
  for (const auto& [T, v] : values) {
    s.emplace_back(T, T * std::abs(v - limit));
    b.sup = std::max(b.sup, s.back().second);
  }
  std::sort(s.begin(), s.end());
  const std::size_t start = s.size() / 2;
  double mt = 0.0, ms = 0.0;
  const double n = static_cast<double>(s.size() - start);
  for (std::size_t i = start; i < s.size(); ++i) {
    mt += s[i].first;
    ms += s[i].second;
  }
  mt /= n;
  ms /= n;
  double stt = 0.0, sts = 0.0;
  for (std::size_t i = start; i < s.size(); ++i) {
    stt += (s[i].first - mt) * (s[i].first - mt);
    sts += (s[i].first - mt) * (s[i].second - ms);
  }
  b.trend_slope = stt > 0.0 ? sts / stt : 0.0;
  b.unbounded = !std::isfinite(b.sup) || b.trend_slope > slope_tol;
  return b;
}

/// Resolution settings for the Monte Carlo and PDE methods.
struct MethodSettings {
  long n_paths = 100000;
  double steps_per_unit = 100.0;
  std::uint64_t seed = 20240601;
  unsigned threads = 0;
  double mc_rel_bump = 1e-3;
  double mc_gamma_rel_bump = 1e-2;
  int pde_n_x = 400;
  int pde_n_t = 400;
  double closed_rel_bump = 1e-5;
  bool richardson = true;
  int fixed_steps = 0;  // when positive, used for every maturity instead of steps_per_unit
  Scheme scheme = Scheme::euler_log;  // every catalog model lives on (0, inf)

  PathConfig path_config(double T) const {
    PathConfig c;
    c.T = T;
    c.n_steps = fixed_steps > 0 ? fixed_steps : std::max(2, static_cast<int>(std::ceil(steps_per_unit * T)));
    if (richardson && c.n_steps % 2 != 0) ++c.n_steps;
    c.richardson = richardson;
    c.n_paths = n_paths;
    c.seed = seed;
    c.threads = threads;
    c.scheme = scheme;
    return c;
  }
};

struct GammaCurves {
  std::vector<CurvePoint> second;  // p''/p
  std::vector<CurvePoint> combo;   // second-order combination with doubled rate
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<double> samples_at(const ModelParams& m, Payoff h, double xi, const PathConfig& cfg,
                                      std::vector<std::uint8_t>& ok) {
  return price_samples(model_quadruple(with_param(m, "xi", xi), payoff_field(h)), xi, cfg, ok);
}

// Ratio estimate sum(a)/sum(b) with a delta-method standard error.
inline std::pair<double, double> ratio_estimate(const std::vector<double>& a, const std::vector<double>& b,
                                                const std::vector<std::uint8_t>& ok) {
  double sa = 0.0, sb = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!ok[i]) continue;
    sa += a[i];
    sb += b[i];
    ++n;
  }
  if (n < 2 || n < 0.99 * static_cast<double>(a.size()))
    throw EstimatorError("rejection-rate", "more than 1% of paths rejected");
  const double r = sa / sb, mb = sb / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!ok[i]) continue;
    const double e = a[i] - r * b[i];
    ss += e * e;
  }
  return {r, std::sqrt(ss / (n - 1) / n) / std::abs(mb)};
}

inline std::vector<std::uint8_t> both_ok(const std::vector<std::uint8_t>& x, const std::vector<std::uint8_t>& y) {
  std::vector<std::uint8_t> o(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] && y[i];
  return o;
}

struct PdeValues {
  double f, fx, fxx;
};

// Remainder f and its first two x-derivatives at (T, xi), from the remainder
// and hatted problems on log grids over the eigen-measure stationary range.
inline PdeValues pde_remainder_values(const DecompositionChain& c, const ModelParams& m, double T,
                                      const MethodSettings& s) {
  const auto [lo, hi] = stationary_range(m, 0.0005, 0.9995);
  const double xi = initial_state(m);
  const PdeGrid g = PdeGrid::around(std::min(lo, 0.5 * xi), std::max(hi, 2.0 * xi), Coordinate::log, s.pde_n_x,
                                    s.pde_n_t);
  const ScalarField h = c.base.payoff, phi = c.pair0.phi;
  const ScalarField init = ScalarField::value_only([h, phi](double x) { return h(x) / phi(x); });
  const PdeSurface f = solve_remainder(c.kappa, c.base.sigma, init, c.base.domain, g, T);
  const PdeSurface fx = solve_fx(c.hatted, c.hatted.payoff, g, T);
  return {f.final_at(xi), fx.final_at(xi), fx.derivative(fx.n_t(), xi)};
}

}  // namespace detail

/// d/dxi ln p_T over a maturity grid.
inline std::vector<CurvePoint> delta_curve(const ModelParams& m, const std::vector<double>& T_grid, Method method,
                                           const MethodSettings& s = {}, Payoff h = Payoff::unit) {
  std::vector<CurvePoint> out;
  const double xi = initial_state(m);
  for (double T : T_grid) {
    if (!(T > 0.0)) throw ContractError("curve-maturity", "curve maturities must be positive");
    CurvePoint pt;
    pt.T = T;
    pt.method = method;
    if (method == Method::closed) {
      pt.value = closed_log_derivatives(m, T, h).d1;
    } else if (method == Method::mc) {
      const PathConfig cfg = s.path_config(T);
      const double dx = xi * s.mc_rel_bump;
      std::vector<std::uint8_t> ou, od, o0;
      const auto up = detail::samples_at(m, h, xi + dx, cfg, ou);
      const auto dn = detail::samples_at(m, h, xi - dx, cfg, od);
      std::vector<double> num(up.size()), den(up.size());
      for (std::size_t i = 0; i < up.size(); ++i) {
        num[i] = (up[i] - dn[i]) / (2.0 * dx);
        den[i] = 0.5 * (up[i] + dn[i]);
      }
      const auto [r, se] = detail::ratio_estimate(num, den, detail::both_ok(ou, od));
      pt.value = r;
      pt.std_error = se;
    } else {
      const DecompositionChain c = model_chain(m, payoff_field(h));
      const auto v = detail::pde_remainder_values(c, m, T, s);
      pt.value = c.pair0.phi.d1(xi) / c.pair0.phi(xi) + v.fx / v.f;
    }
    out.push_back(pt);
  }
  return out;
}

/// p''/p and the combo statistic d2 - (ln phi)'' - (ln phi-hat)'(d1 - (ln phi)').
inline GammaCurves gamma_curve(const ModelParams& m, const std::vector<double>& T_grid, Method method,
                               const MethodSettings& s = {}, Payoff h = Payoff::unit) {
  GammaCurves g;
  const double xi = initial_state(m);
  const DecompositionChain c = model_chain(m, payoff_field(h));
  const double p0 = c.pair0.phi(xi);
  const double l1 = c.pair0.phi.d1(xi) / p0;
  const double l2 = c.pair0.phi.d2(xi) / p0 - l1 * l1;
  const double m1 = c.pair1.phi.d1(xi) / c.pair1.phi(xi);
  if (method == Method::mc && s.n_paths < 1000000)
    g.warnings.push_back("Monte Carlo second differences are noisy below 1e6 paths");
  for (double T : T_grid) {
    if (!(T > 0.0)) throw ContractError("curve-maturity", "curve maturities must be positive");
    CurvePoint a, b;
    a.T = b.T = T;
    a.method = b.method = method;
    if (method == Method::closed) {
      const auto d = closed_log_derivatives(m, T, h);
      a.value = d.gamma();
      b.value = d.combo;
    } else if (method == Method::mc) {
      const PathConfig cfg = s.path_config(T);
      const double dx = xi * s.mc_gamma_rel_bump;
      std::vector<std::uint8_t> ou, o0, od;
      const auto up = detail::samples_at(m, h, xi + dx, cfg, ou);
      const auto md = detail::samples_at(m, h, xi, cfg, o0);
      const auto dn = detail::samples_at(m, h, xi - dx, cfg, od);
      const auto ok = detail::both_ok(detail::both_ok(ou, o0), od);
      std::vector<double> n2(up.size()), n1(up.size());
      for (std::size_t i = 0; i < up.size(); ++i) {
        n2[i] = (up[i] - 2.0 * md[i] + dn[i]) / (dx * dx);
        n1[i] = (up[i] - dn[i]) / (2.0 * dx);
      }
      const auto [r2, se2] = detail::ratio_estimate(n2, md, ok);
      const auto [r1, se1] = detail::ratio_estimate(n1, md, ok);
      a.value = r2;
      a.std_error = se2;
      const double d2 = r2 - r1 * r1;
      b.value = d2 - l2 - m1 * (r1 - l1);
      b.std_error = std::hypot(se2, std::abs(2.0 * r1 + m1) * se1);
    } else {
      const auto v = detail::pde_remainder_values(c, m, T, s);
      const double phi2 = c.pair0.phi.d2(xi) / p0;
      a.value = phi2 + 2.0 * l1 * v.fx / v.f + v.fxx / v.f;
      const double d1 = l1 + v.fx / v.f;
      b.value = (a.value - d1 * d1) - l2 - m1 * (d1 - l1);
    }
    g.second.push_back(a);
    g.combo.push_back(b);
  }
  return g;
}

/// (1/T) d/dparam ln p_T by a central bump of the closed form. Parameters at
/// zero are bumped by the relative size taken as absolute. When the lower leg
/// leaves the admissible range the second-order forward stencil is used.
inline std::vector<CurvePoint> param_curve(const ModelParams& m, const std::string& param,
                                           const std::vector<double>& T_grid, const MethodSettings& s = {}) {
  validate(m);
  const double v = get_param(m, param);
  const double dv = s.closed_rel_bump * (v == 0.0 ? 1.0 : std::abs(v));
  const ModelParams up = with_param(m, param, v + dv), dn = with_param(m, param, v - dv);
  validate(up);
  bool central = true;
  try {
    validate(dn);
  } catch (const Error&) {
    central = false;
  }
  const ModelParams up2 = with_param(m, param, v + 2.0 * dv);
  std::vector<CurvePoint> out;
  for (double T : T_grid) {
    if (!(T > 0.0)) throw ContractError("curve-maturity", "curve maturities must be positive");
    auto lp = [T](const ModelParams& x) { return closed_log_derivatives(x, T).log_price; };
    const double g = central ? (lp(up) - lp(dn)) / (2.0 * dv) : (-3.0 * lp(m) + 4.0 * lp(up) - lp(up2)) / (2.0 * dv);
    out.push_back({T, g / T, std::nullopt, Method::closed});
  }
  return out;
}

/// Path integral E[int_0^T (sigma Sigma f_xx + l f_x)(T - t, X_t) dt] along
/// eigen-measure paths plus the payoff term E[d(h/phi)/d eps (X_T)], for the
/// CIR parameters b, a and sigma with h = 1. This is d f(T, xi)/d eps.
inline Estimate feps_representation(const CirParams& p, double T, const PathConfig& cfg,
                                    const std::string& param = "b") {
  p.validate();
  if (param != "b" && param != "a" && param != "sigma")
    throw ContractError("feps-parameter", "representation available for b, a and sigma");
  if (param == "sigma" && !(p.sigma > 0.0))
    throw ContractError("feps-parameter", "the sigma representation assumes sigma > 0");
  if (T == 0.0) {
    Estimate e;
    e.n = cfg.n_paths;
    e.measure = Measure::P_hat;
    e.seed = cfg.seed;
    return e;
  }
  const DecompositionChain c = cir_chain(p);
  const double al = p.alpha(), et = p.eta(), s2 = p.sigma * p.sigma;
  RunningIntegrand g;
  double d_eta = 0.0;
  if (param == "b") {
    g = [=](double t, double x) { return cir_fx_at(p, T - t, x); };
  } else if (param == "a") {
    d_eta = -et / al;
    g = [=](double t, double x) { return -(p.a / al) * x * cir_fx_at(p, T - t, x); };
  } else {
    d_eta = 2.0 * p.q / (al * p.sigma) - 2.0 * (al - p.a) / (s2 * p.sigma);
    g = [=](double t, double x) {
      return p.sigma * x * cir_fxx_at(p, T - t, x) - (2.0 * p.q * p.sigma / al) * x * cir_fx_at(p, T - t, x);
    };
  }
  PathConfig run = cfg;
  run.T = T;
  const PathBatch b = simulate_paths(c.eigen_dynamics(), p.xi, g, run);
  std::vector<double> v(b.x_T.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = b.ok[i] ? b.integral[i] + d_eta * b.x_T[i] * std::exp(et * b.x_T[i]) : 0.0;
  return summarize(v, b.ok, Measure::P_hat, cfg.seed);
}

}  // namespace hslab
