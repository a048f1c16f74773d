// SPDX-License-Identifier: Apache-2.0
// Reference values computed without the library's closed forms.
#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

namespace hslab::oracle {

/// exp(A(T) - B(T) y) = E_y[exp(-s Y_T - q int_0^T Y)] for
/// dY = (b - a Y) dt + sigma sqrt(Y) dB, via RK4 on the Riccati system
///   B' = q - a B - sigma^2 B^2 / 2,  A' = -b B,  B(0) = s, A(0) = 0.
inline double affine_transform(double a, double b, double sigma, double q, double s, double y, double T,
                               int steps_per_unit = 2000) {
  const int n = std::max(200, static_cast<int>(std::ceil(T * steps_per_unit)));
  const double dt = T / n;
  double A = 0.0, B = s;
  auto fB = [&](double x) { return q - a * x - 0.5 * sigma * sigma * x * x; };
  for (int i = 0; i < n; ++i) {
    const double k1 = fB(B);
    const double k2 = fB(B + 0.5 * dt * k1);
    const double k3 = fB(B + 0.5 * dt * k2);
    const double k4 = fB(B + dt * k3);
    // A' = -b B integrated with the same stages (Simpson weights)
    A += -b * dt / 6.0 * (B + 2.0 * (B + 0.5 * dt * k1) + 2.0 * (B + 0.5 * dt * k2) + (B + dt * k3));
    B += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return std::exp(A - B * y);
}

/// Zero-coupon bond E[exp(-q int_0^T X)] for a square-root short-rate factor.
inline double riccati_bond_price(double a, double b, double sigma, double q, double xi, double T) {
  return affine_transform(a, b, sigma, q, 0.0, xi, T);
}

/// E[X_T^A] for dX = (b - alpha X) X dt + sigma X^{3/2} dB, X_0 = x, through
/// the reciprocal square-root process Y = 1/X and
/// E[Y^{-A}] = (1/Gamma(A+1)) int_0^inf E[exp(-w^{1/A} Y)] dw.
inline double three_halves_moment_by_transform(double alpha, double b, double sigma, double A, double T,
                                               double x) {
  const double bY = alpha + sigma * sigma, aY = b;
  // With no discounting the Riccati equation is of Bernoulli type and
  // 1/B solves a linear equation, giving the transform in closed form.
  const double g = sigma * sigma * (-std::expm1(-aY * T)) / (2.0 * aY);
  auto integrand = [&](double w) {
    const double s = std::pow(w, 1.0 / A);
    const double den = 1.0 + s * g;
    return std::exp(-(2.0 * bY / (sigma * sigma)) * std::log(den) - s * std::exp(-aY * T) / den / x);
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  const double I = integrator.integrate(integrand, 0.0, std::numeric_limits<double>::infinity(), 1e-10);
  return I / std::tgamma(A + 1.0);
}

struct McResult {
  double mean = 0.0;
  double se = 0.0;
};

inline McResult mc_summary(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  return {m, std::sqrt(s2 / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
}

/// Exact transition of dY = (b - a Y) dt + sigma sqrt(Y) dB over dt through
/// the Poisson mixture of Gamma laws.
inline double cir_transition(std::mt19937_64& g, double b, double a, double sigma, double y, double dt) {
  const double c = sigma * sigma * (-std::expm1(-a * dt)) / (4.0 * a);
  const double d = 4.0 * b / (sigma * sigma);
  const double nc = y * std::exp(-a * dt) / c;
  const int n = std::poisson_distribution<int>(0.5 * nc)(g);
  return 2.0 * c * std::gamma_distribution<double>(0.5 * d + n, 1.0)(g);
}

/// Optimal-utility expectation E^Q[(L_T / G_T^nu)^{1/(nu-1)}] for a stock with
/// market price of risk (mu sqrt(X), 0) and variance factor
/// dX = k(m - X) X^j dt + v X^{j+1/2} (rho dZ1 + sqrt(1-rho^2) dZ2), simulated
/// under the risk-neutral measure with two Brownian drivers.
inline McResult utility_expectation_mc(double k, double m, double v, double rho, double mu, double nu, double r,
                                       double xi, int j, double T, int n_paths, int steps, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z;
  const double dt = T / steps, sq = std::sqrt(dt), rr = std::sqrt(1.0 - rho * rho);
  std::vector<double> out(static_cast<std::size_t>(n_paths));
  for (auto& o : out) {
    double x = xi, stoch = 0.0, quad = 0.0;
    for (int i = 0; i < steps; ++i) {
      const double xp = std::max(x, 0.0), th = mu * std::sqrt(xp);
      const double dw1 = sq * z(g), dw2 = sq * z(g);
      stoch += th * dw1;
      quad += th * th * dt;
      const double pj = std::pow(xp, j), vol = v * std::pow(xp, j + 0.5);
      // Z1 = W1 - int theta dt under the risk-neutral measure
      x += (k * (m - xp) * pj - vol * rho * th) * dt + vol * (rho * dw1 + rr * dw2);
    }
    o = std::exp((-stoch + 0.5 * quad - nu * r * T) / (nu - 1.0));
  }
  return mc_summary(out);
}

/// E[exp(-nu Pi_T)] for Pi = int eta/S^2 dS with the 3/2 stock
/// dS = k(m - S) S dt + v S^{3/2} dZ. By Ito, Pi_T = eta (X_0 - X_T + v^2 T) with
/// X = 1/S a square-root process, sampled exactly at T.
inline McResult entropic_cp1_mc(double k, double m, double v, double nu, double eta, double s0, double T,
                                int n_paths, unsigned seed) {
  std::mt19937_64 g(seed);
  const double x0 = 1.0 / s0;
  std::vector<double> out(static_cast<std::size_t>(n_paths));
  for (auto& o : out) {
    const double xT = cir_transition(g, k + v * v, k * m, v, x0, T);
    o = std::exp(-nu * eta * (x0 - xT + v * v * T));
  }
  return mc_summary(out);
}

/// E[exp(-nu Pi_T)] for Pi = int eta/S dS = eta (ln S_T - ln S_0 + v^2/2 int S dt)
/// with the same 3/2 stock, simulated by an Euler step on ln S.
inline McResult entropic_cp2_mc(double k, double m, double v, double nu, double eta, double s0, double T,
                                int n_paths, int steps, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z;
  const double dt = T / steps, sq = std::sqrt(dt);
  std::vector<double> out(static_cast<std::size_t>(n_paths));
  for (auto& o : out) {
    double ls = std::log(s0), integral = 0.0;
    for (int i = 0; i < steps; ++i) {
      const double s = std::exp(ls);
      integral += s * dt;
      ls += (k * (m - s) - 0.5 * v * v * s) * dt + v * std::sqrt(s) * sq * z(g);
    }
    o = std::exp(-nu * eta * (ls - std::log(s0) + 0.5 * v * v * integral));
  }
  return mc_summary(out);
}

/// E[exp(-nu Pi_T)] for a constant-proportion portfolio eta in d stocks with
/// dS_i/S_i = (mu_i + gamma_i X) dt + sum_j sqrt(varsigma_ij X) dZ_j and factor
/// dX = k(m - X) dt + sqrt(X) v . dZ, with full-truncation Euler steps.
inline McResult entropic_affine_mc(double k, double m, const std::vector<double>& v,
                                   const std::vector<std::vector<double>>& varsigma, const std::vector<double>& gamma,
                                   const std::vector<double>& mu, const std::vector<double>& eta, double nu,
                                   double xi, double T, int n_paths, int steps, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z;
  const std::size_t d = v.size();
  const double dt = T / steps, sq = std::sqrt(dt);
  std::vector<double> dz(d), out(static_cast<std::size_t>(n_paths));
  for (auto& o : out) {
    double x = xi, pi = 0.0;
    for (int s = 0; s < steps; ++s) {
      const double xp = std::max(x, 0.0), rx = std::sqrt(xp);
      for (auto& e : dz) e = sq * z(g);
      double dx = k * (m - xp) * dt;
      for (std::size_t j = 0; j < d; ++j) dx += rx * v[j] * dz[j];
      for (std::size_t i = 0; i < d; ++i) {
        double gain = (mu[i] + gamma[i] * xp) * dt;
        for (std::size_t j = 0; j < d; ++j) gain += std::sqrt(varsigma[i][j]) * rx * dz[j];
        pi += eta[i] * gain;
      }
      x += dx;
    }
    o = std::exp(-nu * pi);
  }
  return mc_summary(out);
}

}  // namespace hslab::oracle
