// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <boost/math/special_functions/hypergeometric_1F1.hpp>
#include <gtest/gtest.h>

#include "hslab/special.hpp"

namespace hslab {
namespace {

TEST(Kummer, ZeroArgumentIsOne) {
  EXPECT_EQ(kummer_m(0.3, 2.5, 0.0), 1.0);
  EXPECT_EQ(kummer_m(-4.2, 7.0, 0.0), 1.0);
}

TEST(Kummer, ElementaryIdentities) {
  EXPECT_NEAR(kummer_m(1.0, 2.0, 1.0), std::exp(1.0) - 1.0, 1e-14);
  EXPECT_NEAR(kummer_m(2.0, 2.0, 1.0), std::exp(1.0), 1e-14);
  for (int k = 1; k <= 100; ++k) {
    const double z = 0.1 * k;
    EXPECT_NEAR(kummer_m(1.0, 2.0, z) / (std::expm1(z) / z), 1.0, 1e-10) << z;
    EXPECT_NEAR(kummer_m(2.7, 2.7, z) / std::exp(z), 1.0, 1e-10) << z;
    EXPECT_NEAR(kummer_m(1.0, 2.0, -z) / (-std::expm1(-z) / z), 1.0, 1e-10) << z;
  }
}

TEST(Kummer, TerminatingPolynomial) {
  // M(-2, b, z) = 1 - 2z/b + z^2/(b(b+1))
  const double b = 1.5, z = 3.0;
  EXPECT_NEAR(kummer_m(-2.0, b, z), 1.0 - 2.0 * z / b + z * z / (b * (b + 1.0)), 1e-14);
}

TEST(Kummer, ContiguousRelationOnLattice) {
  for (double a : {0.3, 0.56, 1.2, 2.5}) {
    for (double b : {1.1, 2.6, 5.12}) {
      for (double z : {-80.0, -20.0, -3.0, -0.4, 0.5, 4.0, 30.0, 60.0}) {
        const double lhs = kummer_m(a, b, z);
        const double rhs = kummer_m(a - 1.0, b, z) + z / b * kummer_m(a, b + 1.0, z);
        EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs))) << a << " " << b << " " << z;
      }
    }
  }
}

TEST(Kummer, AgreesWithIndependentImplementation) {
  for (double a : {0.25, 0.5615528, 1.5615528, 3.0}) {
    for (double b : {1.5, 5.1231056, 9.0}) {
      for (double z : {-500.0, -120.0, -51.0, -10.0, -0.01, 0.2, 7.5, 49.0, 75.0, 300.0}) {
        const double ref = boost::math::hypergeometric_1F1(a, b, z);
        EXPECT_NEAR(kummer_m(a, b, z) / ref, 1.0, 1e-10) << a << " " << b << " " << z;
      }
    }
  }
}

TEST(Kummer, LogFormMatchesDirect) {
  for (double z : {-200.0, -5.0, 0.7, 40.0, 400.0}) {
    EXPECT_NEAR(log_kummer_m(0.7, 3.2, z), std::log(kummer_m(0.7, 3.2, z)), 1e-10 * std::max(1.0, std::abs(z)));
  }
  // very large positive argument goes through the asymptotic expansion
  const double w = 1e5;
  EXPECT_NEAR(log_kummer_m(1.0, 2.0, w), w - std::log(w), 1e-9 * w);
}

TEST(Kummer, PoleInSecondParameter) { EXPECT_THROW(kummer_m(1.0, -2.0, 1.0), DomainError); }

TEST(LogGamma, KnownValues) {
  EXPECT_NEAR(log_gamma(1.0), 0.0, 1e-15);
  EXPECT_NEAR(log_gamma(5.0), std::log(24.0), 1e-14);
  EXPECT_NEAR(log_gamma(0.5), 0.5 * std::log(M_PI), 1e-14);
  EXPECT_THROW(log_gamma(0.0), DomainError);
}

}  // namespace
}  // namespace hslab
