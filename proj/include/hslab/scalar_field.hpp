// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>

#include "hslab/errors.hpp"

namespace hslab {

/// Open interval (lower, upper); infinite endpoints are encoded as +-inf.
struct StateInterval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  StateInterval() = default;
  StateInterval(double lo, double hi) : lower(lo), upper(hi) {
    if (!(lo < hi)) {
      std::ostringstream os;
      os << "state interval requires lower < upper, got (" << lo << ", " << hi << ")";
      throw ContractError("interval-order", os.str());
    }
  }

  static StateInterval real_line() { return {}; }
  static StateInterval positive() {
    return {0.0, std::numeric_limits<double>::infinity()};
  }

  bool contains(double x) const noexcept {
    return std::isfinite(x) && x > lower && x < upper;
  }

  void require_interior(double x, const char* what = "state") const {
    if (!contains(x)) {
      std::ostringstream os;
      os << what << " " << x << " is not interior to (" << lower << ", " << upper << ")";
      throw DomainError("domain-violation", os.str());
    }
  }

  /// Nearest point at least `eps` (relative to the endpoint scale) inside.
  double clamp_interior(double x, double eps = 1e-12) const noexcept {
    if (std::isfinite(lower)) {
      const double lo = lower + eps * std::max(1.0, std::abs(lower));
      if (!(x > lo)) x = lo;
    }
    if (std::isfinite(upper)) {
      const double hi = upper - eps * std::max(1.0, std::abs(upper));
      if (!(x < hi)) x = hi;
    }
    return x;
  }
};

/// A real function on the state space with optional analytic first and
/// second derivatives. Missing derivatives fall back to central
/// differences unless the field was built with `Fallback::none`.
class ScalarField {
 public:
  using Fn = std::function<double(double)>;
  enum class Fallback { central, none };

  ScalarField() = default;
  explicit ScalarField(Fn value, Fn d1 = nullptr, Fn d2 = nullptr,
                       Fallback fallback = Fallback::central)
      : value_(std::move(value)), d1_(std::move(d1)), d2_(std::move(d2)), fallback_(fallback) {}

  static ScalarField constant(double c) {
    return ScalarField([c](double) { return c; }, [](double) { return 0.0; },
                       [](double) { return 0.0; });
  }

  /// slope * x + intercept
  static ScalarField affine(double intercept, double slope) {
    return ScalarField([=](double x) { return intercept + slope * x; },
                       [=](double) { return slope; }, [](double) { return 0.0; });
  }

  /// coef * x^p on x > 0
  static ScalarField power(double coef, double p) {
    return ScalarField([=](double x) { return coef * std::pow(x, p); },
                       [=](double x) { return coef * p * std::pow(x, p - 1.0); },
                       [=](double x) { return coef * p * (p - 1.0) * std::pow(x, p - 2.0); });
  }

  /// Value-only field whose derivatives are a contract violation.
  static ScalarField value_only(Fn value) {
    return ScalarField(std::move(value), nullptr, nullptr, Fallback::none);
  }

  bool empty() const noexcept { return !static_cast<bool>(value_); }
  bool analytic_d1() const noexcept { return static_cast<bool>(d1_); }
  bool analytic_d2() const noexcept { return static_cast<bool>(d2_); }
  Fallback fallback() const noexcept { return fallback_; }

  double operator()(double x) const {
    if (!value_) throw ContractError("empty-field", "evaluating an empty scalar field");
    return value_(x);
  }

  double d1(double x) const {
    if (d1_) return d1_(x);
    if (fallback_ == Fallback::none)
      throw ContractError("missing-derivative", "first derivative not available");
    return central_d1(x, d1_step(x));
  }

  double d2(double x) const {
    if (d2_) return d2_(x);
    if (fallback_ == Fallback::none)
      throw ContractError("missing-derivative", "second derivative not available");
    return central_d2(x, d2_step(x));
  }

  double central_d1(double x, double h) const {
    return ((*this)(x + h) - (*this)(x - h)) / (2.0 * h);
  }

  double central_d2(double x, double h) const {
    return ((*this)(x + h) - 2.0 * (*this)(x) + (*this)(x - h)) / (h * h);
  }

  // First derivative: 1e-6 relative step. The second derivative uses 1e-4
  // because its rounding error scales like eps/h^2.
  static double d1_step(double x) noexcept { return 1e-6 * std::max(1.0, std::abs(x)); }
  static double d2_step(double x) noexcept { return 1e-4 * std::max(1.0, std::abs(x)); }

 private:
  Fn value_;
  Fn d1_;
  Fn d2_;
  Fallback fallback_ = Fallback::central;
};

}  // namespace hslab
