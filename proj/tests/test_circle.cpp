#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mfgtorus/circle.hpp"

using namespace mfgtorus;

TEST(Circle, WrapStaysInUnitInterval) {
  EXPECT_DOUBLE_EQ(wrap(1.25), 0.25);
  EXPECT_DOUBLE_EQ(wrap(-0.25), 0.75);
  EXPECT_EQ(wrap(-1e-18), 0.0);
  EXPECT_EQ(wrap(3.0), 0.0);
}

TEST(Circle, SignedDisplacementTakesShorterArc) {
  EXPECT_NEAR(signed_displacement(0.0, 0.3), 0.3, 1e-15);
  EXPECT_NEAR(signed_displacement(0.0, 0.8), -0.2, 1e-15);
  EXPECT_NEAR(signed_displacement(0.9, 0.1), 0.2, 1e-15);
  EXPECT_NEAR(circle_distance(0.05, 0.95), 0.1, 1e-15);
}

TEST(Circle, WrapIndexHandlesNegatives) {
  EXPECT_EQ(wrap_index(-1, 8), 7u);
  EXPECT_EQ(wrap_index(17, 8), 1u);
}

TEST(Circle, PeriodicLinearInterpolatesAcrossSeam) {
  std::vector<double> y{0.0, 1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(periodic_linear(y, 0.125), 0.5);
  EXPECT_DOUBLE_EQ(periodic_linear(y, 0.875), 1.5);  // between y[3] = 3 and y[0] = 0
}

TEST(Circle, SplineIsFourthOrderOnSmoothData) {
  auto err = [](std::size_t n) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = std::sin(two_pi * static_cast<double>(i) / static_cast<double>(n));
    PeriodicSpline s(y);
    double e = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const double x = (k + 0.37) / 1000.0;
      e = std::max(e, std::abs(s(x) - std::sin(two_pi * x)));
    }
    return e;
  };
  const double e1 = err(32), e2 = err(64);
  EXPECT_LT(e2, 1e-5);
  EXPECT_GT(e1 / e2, 12.0);
}

TEST(Circle, SplineDerivativesMatchClosedForm) {
  const std::size_t n = 256;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = std::cos(two_pi * static_cast<double>(i) / n);
  PeriodicSpline s(y);
  for (double x : {0.0, 0.1, 0.5, 0.77}) {
    EXPECT_NEAR(s.derivative(x), -two_pi * std::sin(two_pi * x), 1e-4);
    EXPECT_NEAR(s.second_derivative(x), -two_pi * two_pi * std::cos(two_pi * x), 1e-2);
  }
  EXPECT_NEAR(s(1.0 + 0.1), s(0.1), 1e-15);
}

TEST(Circle, QuadratureRules) {
  EXPECT_NEAR(gauss_legendre5([](double x) { return std::pow(x, 9); }, 0.0, 1.0), 0.1, 1e-14);
  EXPECT_NEAR(simpson([](double x) { return std::sin(x); }, 0.0, std::numbers::pi, 100), 2.0, 1e-7);
  std::vector<double> t{0.0, 0.5, 2.0}, f{0.0, 1.0, 4.0};
  EXPECT_DOUBLE_EQ(trapezoid(t, f), 0.25 + 3.75);
  const auto c = cumulative_trapezoid(t, f);
  EXPECT_DOUBLE_EQ(c[1], 0.25);
  EXPECT_DOUBLE_EQ(c[2], 4.0);
}
