// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hslab/core.hpp"
#include "hslab/errors.hpp"
#include "hslab/rng.hpp"

namespace hslab {

enum class Scheme { euler_full_truncation, euler_log, cir_exact };
enum class Measure { P, P_hat, P_tilde };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::euler_full_truncation: return "euler-full-truncation";
    case Scheme::euler_log: return "euler-log";
    case Scheme::cir_exact: return "cir-exact";
  }
  return "?";
}
inline const char* to_string(Measure m) {
  switch (m) {
    case Measure::P: return "P";
    case Measure::P_hat: return "P-hat";
    case Measure::P_tilde: return "P-tilde";
  }
  return "?";
}

struct PathConfig {
  double T = 1.0;
  int n_steps = 100;
  long n_paths = 100000;
  std::uint64_t seed = 20240601;
  Scheme scheme = Scheme::euler_full_truncation;
  unsigned threads = 0;  // 0 picks the hardware concurrency; never changes results
  // Each Euler increment sums this many unit normals (scaled back to one),
  // so a run with n_steps and coarsen 2 is driven by the same Brownian path
  // as a run with 2 n_steps and coarsen 1.
  int coarsen = 1;
  // Richardson extrapolation of per-path payoffs: 2 V(n_steps) - V(n_steps/2)
  // on coupled paths. Removes the first-order weak error of the Euler schemes.
  bool richardson = false;

  void validate() const {
    if (!(T >= 0.0) || !std::isfinite(T)) throw ContractError("path-config", "horizon must be finite and >= 0");
    if (n_steps < 1) throw ContractError("path-config", "n_steps must be at least 1");
    if (n_paths < 2) throw ContractError("path-config", "n_paths must be at least 2");
    if (coarsen < 1) throw ContractError("path-config", "coarsen must be at least 1");
    if (richardson && (n_steps % 2 != 0 || scheme == Scheme::cir_exact))
      throw ContractError("path-config", "Richardson extrapolation needs an Euler scheme and an even n_steps");
  }

  /// Default resolution: 100 steps per unit of time.
  static int default_steps(double T) { return std::max(1, static_cast<int>(std::ceil(100.0 * T))); }
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  long n = 0;
  Measure measure = Measure::P;
  std::uint64_t seed = 0;
  long rejected = 0;
};

/// Per-path terminal states and accumulated integrals. Rejected paths carry
/// ok == 0 and are excluded by the estimators.
struct PathBatch {
  std::vector<double> x_T;
  std::vector<double> integral;
  std::vector<std::uint8_t> ok;
  long rejected = 0;
};

/// Time-dependent running integrand g(t, x); integrated by the trapezoid rule.
using RunningIntegrand = std::function<double(double, double)>;

namespace detail {

inline unsigned worker_count(unsigned requested, long n_paths) {
  unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return static_cast<unsigned>(std::min<long>(n, n_paths));
}

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index writes only
/// its own output slot, so the result does not depend on the split.
template <class Body>
void parallel_for(long n, unsigned threads, Body body) {
  const unsigned w = worker_count(threads, n);
  if (w <= 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  const long chunk = (n + w - 1) / w;
  for (unsigned t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        const long lo = t * chunk, hi = std::min(n, lo + chunk);
        for (long i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// One exact transition of dX = (b - a X) dt + s sqrt(X) dB over dt:
// X = c * chi2'(d, nc). For d > 1 the noncentral chi-square splits as
// (Z + sqrt(nc))^2 + chi2(d - 1); otherwise it is drawn as a Poisson mixture
// of Gamma variates.
inline double cir_exact_step(const SquareRootForm& f, double x, double dt, PathStream& rng) {
  const double s2 = f.sigma * f.sigma;
  const double decay = std::exp(-f.a * dt);
  const double c = f.a == 0.0 ? 0.25 * s2 * dt : s2 * (-std::expm1(-f.a * dt)) / (4.0 * f.a);
  const double d = 4.0 * f.b / s2;
  const double nc = x * decay / c;
  if (d > 1.0) {
    const double z = rng.normal() + std::sqrt(nc);
    return c * (z * z + 2.0 * std::gamma_distribution<double>(0.5 * (d - 1.0), 1.0)(rng));
  }
  long n = 0;
  if (nc > 0.0) n = std::poisson_distribution<long>(0.5 * nc)(rng);
  const double shape = 0.5 * d + static_cast<double>(n);
  return 2.0 * c * std::gamma_distribution<double>(shape, 1.0)(rng);
}

}  // namespace detail

/// Simulates X on [0, T] from x0 and accumulates int_0^T g(t, X_t) dt.
inline PathBatch simulate_paths(const Dynamics& dyn, double x0, const RunningIntegrand& g, const PathConfig& cfg) {
  cfg.validate();
  dyn.domain.require_interior(x0, "initial state");
  if (cfg.scheme == Scheme::cir_exact && !dyn.sqrt_form) {
    throw ContractError("scheme-mismatch", "cir-exact scheme needs a declared square-root diffusion");
  }
  if (cfg.scheme == Scheme::euler_log && !(dyn.domain.lower == 0.0 && std::isinf(dyn.domain.upper))) {
    throw ContractError("scheme-mismatch", "euler-log scheme needs the domain (0, inf)");
  }
  const long n = cfg.n_paths;
  const int m = cfg.n_steps;
  const double dt = cfg.T / m, sq = std::sqrt(dt);
  const double norm_scale = 1.0 / std::sqrt(static_cast<double>(cfg.coarsen));
  PathBatch out;
  out.x_T.assign(n, 0.0);
  out.integral.assign(n, 0.0);
  out.ok.assign(n, 0);

  detail::parallel_for(n, cfg.threads, [&](long i) {
    PathStream rng(cfg.seed, static_cast<std::uint64_t>(i));
    double x = x0;
    double acc = 0.0;
    double g_prev = g ? g(0.0, x0) : 0.0;
    bool ok = true;
    auto increment = [&] {
      if (cfg.coarsen == 1) return rng.normal();
      double z = 0.0;
      for (int j = 0; j < cfg.coarsen; ++j) z += rng.normal();
      return z * norm_scale;
    };
    for (int k = 1; k <= m && ok; ++k) {
      if (cfg.scheme == Scheme::cir_exact) {
        x = detail::cir_exact_step(*dyn.sqrt_form, x, dt, rng);
      } else if (cfg.scheme == Scheme::euler_log) {
        // Euler step for ln X: drift b/x - sigma^2/(2x^2), volatility sigma/x
        const double v = dyn.sigma(x) / x;
        x *= std::exp((dyn.drift(x) / x - 0.5 * v * v) * dt + v * sq * increment());
        if (x == 0.0) x = std::numeric_limits<double>::quiet_NaN();
      } else {
        const double xe = dyn.domain.clamp_interior(x);
        x = x + dyn.drift(xe) * dt + dyn.sigma(xe) * sq * increment();
      }
      if (!std::isfinite(x)) {
        ok = false;
        break;
      }
      if (g) {
        const double gn = g(k * dt, dyn.domain.clamp_interior(x));
        acc += 0.5 * dt * (g_prev + gn);
        g_prev = gn;
      }
    }
    if (ok && !std::isfinite(acc)) ok = false;
    out.x_T[i] = ok ? dyn.domain.clamp_interior(x) : 0.0;
    out.integral[i] = ok ? acc : 0.0;
    out.ok[i] = ok ? 1 : 0;
  });
  for (long i = 0; i < n; ++i) out.rejected += out.ok[i] ? 0 : 1;
  return out;
}

/// Per-path (X_T, int_0^T rho(X_s) ds).
inline PathBatch simulate_terminal(const Dynamics& dyn, double x0, const ScalarField& rho, const PathConfig& cfg) {
  return simulate_paths(dyn, x0, [&rho](double, double x) { return rho(x); }, cfg);
}

/// Mean and standard error of per-path values, summed in path order. Paths
/// flagged in `ok` as rejected are skipped; more than 1% rejected is an error.
inline Estimate summarize(const std::vector<double>& values, const std::vector<std::uint8_t>& ok, Measure measure,
                          std::uint64_t seed) {
  long n = 0, rejected = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!ok[i] || !std::isfinite(values[i])) {
      ++rejected;
      continue;
    }
    sum += values[i];
    ++n;
  }
  if (rejected > 0.01 * static_cast<double>(values.size()) || n < 2) {
    std::ostringstream os;
    os << rejected << " of " << values.size() << " paths rejected (limit 1%)";
    throw EstimatorError("rejection-rate", os.str());
  }
  const double mean = sum / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!ok[i] || !std::isfinite(values[i])) continue;
    const double d = values[i] - mean;
    ss += d * d;
  }
  Estimate e;
  e.mean = mean;
  e.std_error = std::sqrt(ss / (n - 1) / n);
  e.n = n;
  e.measure = measure;
  e.seed = seed;
  e.rejected = rejected;
  return e;
}

/// Per-path discounted payoffs exp(-int r) h(X_T) under the quadruple's dynamics.
inline std::vector<double> price_samples(const Quadruple& q, double xi, const PathConfig& cfg,
                                         std::vector<std::uint8_t>& ok) {
  auto run = [&](const PathConfig& c, std::vector<std::uint8_t>& flags) {
    const PathBatch b = simulate_terminal(q.dynamics(), xi, q.rate, c);
    std::vector<double> v(b.x_T.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = b.ok[i] ? std::exp(-b.integral[i]) * q.payoff(b.x_T[i]) : 0.0;
    flags = b.ok;
    return v;
  };
  if (!cfg.richardson) return run(cfg, ok);
  cfg.validate();
  PathConfig fine = cfg, coarse = cfg;
  fine.richardson = coarse.richardson = false;
  coarse.n_steps = cfg.n_steps / 2;
  coarse.coarsen = 2 * cfg.coarsen;
  std::vector<std::uint8_t> okc;
  std::vector<double> v = run(fine, ok);
  const std::vector<double> c = run(coarse, okc);
  for (std::size_t i = 0; i < v.size(); ++i) {
    ok[i] = ok[i] && okc[i];
    v[i] = ok[i] ? 2.0 * v[i] - c[i] : 0.0;
  }
  return v;
}

/// Monte Carlo estimate of E_xi[exp(-int_0^T r(X)) h(X_T)].
inline Estimate estimate_price_direct(const Quadruple& q, double xi, const PathConfig& cfg,
                                      Measure measure = Measure::P) {
  std::vector<std::uint8_t> ok;
  const auto v = price_samples(q, xi, cfg, ok);
  return summarize(v, ok, measure, cfg.seed);
}

/// phi(xi) e^{-lambda T} times the eigen-measure mean of (h/phi)(X_T).
inline Estimate estimate_price_hs(const DecompositionChain& c, double xi, const PathConfig& cfg) {
  PathConfig run = cfg;
  if (run.scheme == Scheme::cir_exact && !c.eigen_sqrt_form) run.scheme = Scheme::euler_full_truncation;
  const PathBatch b = simulate_paths(c.eigen_dynamics(), xi, nullptr, run);
  std::vector<double> v(b.x_T.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = b.ok[i] ? c.base.payoff(b.x_T[i]) / c.pair0.phi(b.x_T[i]) : 0.0;
  Estimate e = summarize(v, b.ok, Measure::P_hat, cfg.seed);
  const double scale = c.pair0.phi(xi) * std::exp(-c.pair0.lambda * cfg.T);
  e.mean *= scale;
  e.std_error *= scale;
  return e;
}

/// f_x(T, xi) as the price of the hatted problem: paths under drift
/// kappa + sigma sigma', discount by -kappa', payoff (h/phi)'.
inline Estimate estimate_fx_hs(const DecompositionChain& c, double xi, const PathConfig& cfg) {
  PathConfig run = cfg;
  if (run.scheme == Scheme::cir_exact && !c.hatted.sqrt_form) run.scheme = Scheme::euler_full_truncation;
  return estimate_price_direct(c.hatted, xi, run, Measure::P_hat);
}

/// Central difference (f(p0(1+h)) - f(p0(1-h))) / (2 p0 h) of a deterministic pricer.
inline double bump_derivative(const std::function<double(double)>& pricer, double p0, double rel_bump) {
  if (!(rel_bump > 0.0 && rel_bump <= 1e-2)) throw ContractError("bump-size", "rel_bump must lie in (0, 1e-2]");
  if (p0 == 0.0) throw ContractError("bump-base", "relative bump needs a nonzero base value");
  const double h = p0 * rel_bump;
  return (pricer(p0 + h) - pricer(p0 - h)) / (2.0 * h);
}

/// Per-path pricer: fills one value per path and the acceptance flags. Both
/// legs of a bump run with the same seed, so paths pair up by index.
using PathPricer = std::function<std::vector<double>(double, std::vector<std::uint8_t>&)>;

/// Common-random-number central difference with a standard error from the
/// paired per-path differences.
inline Estimate bump_derivative(const PathPricer& pricer, double p0, double rel_bump, std::uint64_t seed) {
  if (!(rel_bump > 0.0 && rel_bump <= 1e-2)) throw ContractError("bump-size", "rel_bump must lie in (0, 1e-2]");
  if (p0 == 0.0) throw ContractError("bump-base", "relative bump needs a nonzero base value");
  const double h = p0 * rel_bump;
  std::vector<std::uint8_t> ok_up, ok_dn;
  const auto up = pricer(p0 + h, ok_up);
  const auto dn = pricer(p0 - h, ok_dn);
  if (up.size() != dn.size()) throw ContractError("bump-legs", "bump legs returned different path counts");
  std::vector<double> d(up.size());
  std::vector<std::uint8_t> ok(up.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    ok[i] = ok_up[i] && ok_dn[i];
    d[i] = ok[i] ? (up[i] - dn[i]) / (2.0 * h) : 0.0;
  }
  return summarize(d, ok, Measure::P, seed);
}

}  // namespace hslab
