// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <sstream>

#include "hslab/errors.hpp"

namespace hslab {

inline double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log-gamma-argument", "log_gamma needs a positive argument");
  return std::lgamma(x);
}

namespace detail {

constexpr long kKummerMaxTerms = 100000;
constexpr double kKummerTol = 1e-14;

inline bool is_nonpositive_integer(double v) { return v <= 0.0 && v == std::floor(v); }

struct SignedLog {
  double sign;
  double log_abs;
  double value() const { return sign * std::exp(log_abs); }
};

// M(a, b, w) for w >= 0 from the power series, summed relative to a running
// scale so that arguments in the hundreds do not overflow. Terms change sign
// at most for the first ceil(-a) indices, so there is no large cancellation.
inline SignedLog signed_log_kummer_series(double a, double b, double w) {
  double log_scale = 0.0;  // sum = exp(log_scale) * acc
  double acc = 1.0;
  double term = 1.0;  // scaled by exp(-log_scale)
  for (long n = 0; n < kKummerMaxTerms; ++n) {
    term *= (a + n) / ((b + n) * (n + 1.0)) * w;
    acc += term;
    const double mag = std::max(std::abs(acc), std::abs(term));
    if (mag > 1e250) {
      log_scale += std::log(mag);
      term /= mag;
      acc /= mag;
    }
    if (term == 0.0 || (std::abs(term) <= kKummerTol * std::abs(acc) && n > w - b)) {
      if (acc == 0.0) return {0.0, -std::numeric_limits<double>::infinity()};
      return {acc > 0.0 ? 1.0 : -1.0, log_scale + std::log(std::abs(acc))};
    }
  }
  std::ostringstream os;
  os << "Kummer series did not converge within " << kKummerMaxTerms << " terms (a=" << a << ", b=" << b
     << ", z=" << w << ")";
  throw NumericError("kummer-nonconvergence", os.str());
}

// Plain series, used for moderate |z| and for terminating polynomials.
inline double kummer_series(double a, double b, double z) {
  double sum = 1.0;
  double term = 1.0;
  for (long n = 0; n < kKummerMaxTerms; ++n) {
    term *= (a + n) / ((b + n) * (n + 1.0)) * z;
    sum += term;
    if (term == 0.0 || (std::abs(term) <= kKummerTol * std::abs(sum) && n > std::abs(z) - b)) return sum;
  }
  std::ostringstream os;
  os << "Kummer series did not converge within " << kKummerMaxTerms << " terms (a=" << a << ", b=" << b
     << ", z=" << z << ")";
  throw NumericError("kummer-nonconvergence", os.str());
}

// Leading large-argument expansion, w -> +inf:
// M(a,b,w) ~ Gamma(b)/Gamma(a) e^w w^(a-b) sum_n (b-a)_n (1-a)_n / (n! w^n).
inline SignedLog signed_log_kummer_asymptotic(double a, double b, double w) {
  double sum = 1.0, term = 1.0, best = std::numeric_limits<double>::infinity();
  for (int n = 0; n < 200; ++n) {
    const double next = term * (b - a + n) * (1.0 - a + n) / ((n + 1.0) * w);
    if (std::abs(next) >= best) break;  // divergent tail of the asymptotic series
    best = std::abs(next);
    term = next;
    sum += term;
    if (std::abs(term) <= kKummerTol * std::abs(sum)) break;
  }
  const double ga_sign = std::tgamma(a) < 0.0 ? -1.0 : 1.0;
  return {ga_sign * (sum < 0.0 ? -1.0 : 1.0),
          std::lgamma(b) - std::lgamma(a) + w + (a - b) * std::log(w) + std::log(std::abs(sum))};
}

// M(a, b, w) for w > 0 and b > 0, a not a non-positive integer.
inline SignedLog signed_log_kummer_positive(double a, double b, double w) {
  if (a == 0.0) return {1.0, 0.0};
  if (a == b) return {1.0, w};
  if (w > 5.0e4) return signed_log_kummer_asymptotic(a, b, w);
  return signed_log_kummer_series(a, b, w);
}

}  // namespace detail

/// Natural log of Kummer's M(a, b, z) for a, b > 0 (the case in which M is
/// positive for every real z).
inline double log_kummer_m(double a, double b, double z) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("kummer-log-domain", "log_kummer_m needs a, b > 0");
  if (z == 0.0) return 0.0;
  // Kummer's transformation M(a,b,z) = e^z M(b-a, b, -z) keeps the series one-signed.
  const detail::SignedLog r = z < 0.0 ? detail::signed_log_kummer_positive(b - a, b, -z)
                                      : detail::signed_log_kummer_positive(a, b, z);
  if (!(r.sign > 0.0)) throw NumericError("kummer-sign", "non-positive Kummer value in log form");
  return z < 0.0 ? z + r.log_abs : r.log_abs;
}

/// Kummer's confluent hypergeometric function M(a, b, z) = 1F1(a; b; z).
/// Plain series with term-ratio recurrence for |z| <= 50 when the terms keep
/// one sign. Other arguments go through Kummer's transformation and a
/// log-scaled series, or the asymptotic expansion when very large.
inline double kummer_m(double a, double b, double z) {
  if (detail::is_nonpositive_integer(b)) {
    throw DomainError("kummer-b-pole", "Kummer M undefined for non-positive integer b");
  }
  if (z == 0.0 || a == 0.0) return 1.0;
  if (detail::is_nonpositive_integer(a)) return detail::kummer_series(a, b, z);  // polynomial
  if (b < 0.0) return detail::kummer_series(a, b, z);
  if (z > 0.0) {
    if (z <= 50.0) return detail::kummer_series(a, b, z);
    return detail::signed_log_kummer_positive(a, b, z).value();
  }
  const double c = b - a;
  if (detail::is_nonpositive_integer(c)) return std::exp(z) * detail::kummer_series(c, b, -z);
  if (-z <= 50.0) return std::exp(z) * detail::kummer_series(c, b, -z);
  const detail::SignedLog r = detail::signed_log_kummer_positive(c, b, -z);
  return r.sign * std::exp(z + r.log_abs);
}

}  // namespace hslab
