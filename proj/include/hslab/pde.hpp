// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hslab/core.hpp"
#include "hslab/errors.hpp"

namespace hslab {

enum class Coordinate { native, log };

struct PdeGrid {
  double x_min = 0.0;
  double x_max = 1.0;
  int n_x = 400;
  int n_t = 400;
  Coordinate coordinate = Coordinate::native;

  void validate(const StateInterval& domain) const {
    if (!(x_min < x_max)) throw ContractError("pde-grid", "x_min must be below x_max");
    if (!domain.contains(x_min) || !domain.contains(x_max))
      throw ContractError("pde-grid", "grid bounds must be interior to the state domain");
    if (n_x < 50 || n_t < 50) throw ContractError("pde-grid", "n_x and n_t must be at least 50");
    if (coordinate == Coordinate::log && !(x_min > 0.0))
      throw ContractError("pde-grid", "log coordinate needs a positive lower bound");
  }

  /// Working coordinate z of the state x.
  double to_z(double x) const { return coordinate == Coordinate::log ? std::log(x) : x; }
  double to_x(double z) const { return coordinate == Coordinate::log ? std::exp(z) : z; }

  /// Grid covering [lo, hi] widened by 25% of its span on each side, measured
  /// in the working coordinate.
  static PdeGrid around(double lo, double hi, Coordinate c, int n_x = 400, int n_t = 400) {
    PdeGrid g;
    g.coordinate = c;
    g.n_x = n_x;
    g.n_t = n_t;
    const double z0 = g.to_z(lo), z1 = g.to_z(hi), w = 0.25 * (z1 - z0);
    g.x_min = g.to_x(z0 - w);
    g.x_max = g.to_x(z1 + w);
    if (c == Coordinate::native && lo > 0.0 && !(g.x_min > 0.0)) g.x_min = 0.5 * lo;
    return g;
  }
};

/// Solution values on the (t, x) lattice; row k holds time k T / n_t.
struct PdeSurface {
  PdeGrid grid;
  double T = 0.0;
  std::vector<double> z;  // working-coordinate nodes
  std::vector<double> values;

  std::size_t n_x() const { return z.size(); }
  std::size_t n_t() const { return values.size() / z.size() - 1; }
  double t_at(std::size_t k) const { return T * static_cast<double>(k) / static_cast<double>(n_t()); }
  double at(std::size_t k, std::size_t i) const { return values[k * n_x() + i]; }

  /// Four-point Lagrange interpolation at state x on time row k.
  double interpolate(std::size_t k, double x) const {
    const double zz = grid.to_z(x);
    if (!(zz >= z.front() && zz <= z.back())) throw DomainError("pde-interpolation", "point outside the PDE grid");
    const double h = z[1] - z[0];
    auto j = static_cast<long>(std::floor((zz - z[0]) / h)) - 1;
    j = std::clamp<long>(j, 0, static_cast<long>(n_x()) - 4);
    double s = 0.0;
    for (int a = 0; a < 4; ++a) {
      double w = 1.0;
      for (int b = 0; b < 4; ++b)
        if (b != a) w *= (zz - z[j + b]) / (z[j + a] - z[j + b]);
      s += w * at(k, j + a);
    }
    return s;
  }

  /// x-derivative of the same four-point interpolant.
  double derivative(std::size_t k, double x) const {
    const double zz = grid.to_z(x);
    if (!(zz >= z.front() && zz <= z.back())) throw DomainError("pde-interpolation", "point outside the PDE grid");
    const double h = z[1] - z[0];
    auto j = static_cast<long>(std::floor((zz - z[0]) / h)) - 1;
    j = std::clamp<long>(j, 0, static_cast<long>(n_x()) - 4);
    double s = 0.0;
    for (int a = 0; a < 4; ++a) {
      double dw = 0.0;
      for (int m = 0; m < 4; ++m) {
        if (m == a) continue;
        double w = 1.0 / (z[j + a] - z[j + m]);
        for (int b = 0; b < 4; ++b)
          if (b != a && b != m) w *= (zz - z[j + b]) / (z[j + a] - z[j + b]);
        dw += w;
      }
      s += dw * at(k, j + a);
    }
    return grid.coordinate == Coordinate::log ? s / x : s;
  }

  double final_at(double x) const { return interpolate(n_t(), x); }

  /// Writes rows "t,x,value" for plotting.
  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ContractError("io", "cannot open " + path);
    out << "t,x,value\n";
    char buf[96];
    for (std::size_t k = 0; k <= n_t(); ++k)
      for (std::size_t i = 0; i < n_x(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t_at(k), grid.to_x(z[i]), at(k, i));
        out << buf;
      }
  }
};

namespace detail {

// Solves a tridiagonal system in place (sub, diag, super, rhs -> solution).
inline void thomas(std::vector<double>& a, std::vector<double>& b, std::vector<double>& c, std::vector<double>& d) {
  const std::size_t n = d.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = a[i] / b[i - 1];
    b[i] -= m * c[i - 1];
    d[i] -= m * d[i - 1];
  }
  d[n - 1] /= b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
}

}  // namespace detail

/// Crank-Nicolson solve of u_t = (1/2) sigma^2 u_xx + drift u_x + reaction u,
/// u(0, x) = initial(x), with zero curvature at both truncation edges.
/// Central differences are replaced by one-sided ones in cells whose Peclet
/// number exceeds 2.
inline PdeSurface solve_convection_diffusion(const ScalarField& drift, const ScalarField& sigma,
                                             const ScalarField& reaction, const ScalarField& initial,
                                             const StateInterval& domain, const PdeGrid& grid, double T) {
  grid.validate(domain);
  if (!(T >= 0.0)) throw ContractError("pde-horizon", "T must be nonnegative");
  const int N = grid.n_x, M = grid.n_t;
  const double z0 = grid.to_z(grid.x_min), z1 = grid.to_z(grid.x_max);
  const double h = (z1 - z0) / (N - 1), dt = T / M;

  PdeSurface s;
  s.grid = grid;
  s.T = T;
  s.z.resize(N);
  std::vector<double> lo(N, 0.0), mid(N, 0.0), up(N, 0.0);
  double max_reaction = 0.0;
  for (int i = 0; i < N; ++i) {
    s.z[i] = z0 + i * h;
    const double x = grid.to_x(s.z[i]);
    const double sg = sigma(x), a0 = 0.5 * sg * sg, b0 = drift(x), c0 = reaction(x);
    double A = a0, B = b0;
    if (grid.coordinate == Coordinate::log) {
      A = a0 / (x * x);
      B = b0 / x - A;
    }
    if (!std::isfinite(A) || !std::isfinite(B) || !std::isfinite(c0))
      throw NumericError("pde-coefficients", "non-finite PDE coefficient on the grid");
    max_reaction = std::max(max_reaction, c0);
    const double diff = A / (h * h);
    if (std::abs(B) * h > 2.0 * A) {
      if (B > 0.0) {
        lo[i] = diff;
        up[i] = diff + B / h;
        mid[i] = -2.0 * diff - B / h + c0;
      } else {
        lo[i] = diff - B / h;
        up[i] = diff;
        mid[i] = -2.0 * diff + B / h + c0;
      }
    } else {
      lo[i] = diff - 0.5 * B / h;
      up[i] = diff + 0.5 * B / h;
      mid[i] = -2.0 * diff + c0;
    }
  }
  // Edge nodes follow u_0 = 2 u_1 - u_2 (and its mirror); fold them into the
  // first and last interior rows.
  const int n = N - 2;
  std::vector<double> la(n), lb(n), lc(n);
  for (int r = 0; r < n; ++r) {
    const int i = r + 1;
    la[r] = lo[i];
    lb[r] = mid[i];
    lc[r] = up[i];
  }
  lb[0] += 2.0 * la[0];
  lc[0] -= la[0];
  la[0] = 0.0;
  la[n - 1] -= lc[n - 1];
  lb[n - 1] += 2.0 * lc[n - 1];
  lc[n - 1] = 0.0;

  s.values.resize(static_cast<std::size_t>(M + 1) * N);
  std::vector<double> u(N);
  double init_norm = 0.0;
  for (int i = 0; i < N; ++i) {
    u[i] = initial(grid.to_x(s.z[i]));
    if (!std::isfinite(u[i])) throw NumericError("pde-initial", "non-finite initial data on the grid");
    init_norm = std::max(init_norm, std::abs(u[i]));
  }
  std::copy(u.begin(), u.end(), s.values.begin());
  const double limit = 10.0 * std::max(init_norm, 1e-300) * std::exp(T * max_reaction);

  std::vector<double> a(n), b(n), c(n), d(n);
  for (int k = 1; k <= M; ++k) {
    for (int r = 0; r < n; ++r) {
      const int i = r + 1;
      // folded rows carry zero weight on the edge nodes
      const double lu = la[r] * u[i - 1] + lb[r] * u[i] + lc[r] * u[i + 1];
      d[r] = u[i] + 0.5 * dt * lu;
      a[r] = -0.5 * dt * la[r];
      b[r] = 1.0 - 0.5 * dt * lb[r];
      c[r] = -0.5 * dt * lc[r];
    }
    detail::thomas(a, b, c, d);
    double norm = 0.0;
    for (int r = 0; r < n; ++r) {
      u[r + 1] = d[r];
      norm = std::max(norm, std::abs(d[r]));
    }
    u[0] = 2.0 * u[1] - u[2];
    u[N - 1] = 2.0 * u[N - 2] - u[N - 3];
    norm = std::max({norm, std::abs(u[0]), std::abs(u[N - 1])});
    if (!std::isfinite(norm) || (init_norm > 0.0 && norm > limit)) {
      std::ostringstream os;
      os << "PDE solution grew beyond 10x its initial max norm at t=" << k * dt
         << "; refine the grid (n_x, n_t) or narrow the truncation";
      throw NumericError("pde-instability", os.str());
    }
    std::copy(u.begin(), u.end(), s.values.begin() + static_cast<std::ptrdiff_t>(k) * N);
  }
  return s;
}

/// Remainder function: f_t = (1/2) sigma^2 f_xx + kappa f_x, f(0) = h/phi.
inline PdeSurface solve_remainder(const ScalarField& kappa, const ScalarField& sigma, const ScalarField& initial,
                                  const StateInterval& domain, const PdeGrid& grid, double T) {
  return solve_convection_diffusion(kappa, sigma, ScalarField::constant(0.0), initial, domain, grid, T);
}

/// f_x from the hatted problem: drift kappa + sigma sigma', reaction kappa' =
/// minus the hatted rate, initial (h/phi)'.
inline PdeSurface solve_fx(const Quadruple& hatted, const ScalarField& initial, const PdeGrid& grid, double T) {
  const ScalarField rate = hatted.rate;
  const ScalarField reaction = ScalarField::value_only([rate](double x) { return -rate(x); });
  return solve_convection_diffusion(hatted.drift, hatted.sigma, reaction, initial, hatted.domain, grid, T);
}

}  // namespace hslab
