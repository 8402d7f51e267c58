#include <gtest/gtest.h>

#include <cmath>

#include "mfgtorus/example_verifier.hpp"

using namespace mfgtorus;

TEST(Example, OneDimensionalPairSolvesBothEquations) {
  const ExampleInstance e{1, 256, 256, ExampleCandidate::periodic};
  EXPECT_LE(hjb_residual(e), 1e-10);
  EXPECT_LE(continuity_residual_example(e), 1e-10);
}

TEST(Example, GridResidualIsSecondOrder) {
  const ExampleInstance coarse{1, 128, 128, ExampleCandidate::periodic};
  const ExampleInstance fine{1, 256, 256, ExampleCandidate::periodic};
  const double rc = hjb_residual(coarse, ResidualMode::finite_difference);
  const double rf = hjb_residual(fine, ResidualMode::finite_difference);
  EXPECT_LE(rf, 1e-3);
  EXPECT_NEAR(rc / rf, 4.0, 0.5);
  EXPECT_LE(continuity_residual_example(fine, ResidualMode::finite_difference), 1e-3);
}

TEST(Example, CouplingAlongThePair) {
  // F(m(t)) = 2 pi cos(2 pi t) = d_t u
  const ExampleInstance e{1, 256, 64, ExampleCandidate::periodic};
  for (double t : {0.0, 0.2, 0.7}) EXPECT_NEAR(example_coupling(e, t), two_pi * std::cos(two_pi * t), 1e-10);
  const ExampleInstance e2{2, 64, 64, ExampleCandidate::periodic};
  EXPECT_NEAR(example_coupling(e2, 0.3), two_pi * std::cos(two_pi * 0.3), 1e-10);
}

TEST(Example, HigherDimensionsLeaveContinuityDefect) {
  for (int n : {2, 3}) {
    const ExampleInstance e{n, 32, 64, ExampleCandidate::periodic};
    EXPECT_LE(hjb_residual(e), 1e-10);
    // (n - 1) 2 pi sin(2 pi (sum x + t)), maximal amplitude on the grid
    EXPECT_NEAR(continuity_residual_example(e), (n - 1) * two_pi, 1e-9);
  }
}

TEST(Example, RescaledAndStationaryCandidates) {
  for (int n : {1, 2, 3}) {
    const ExampleInstance r{n, 32, 64, ExampleCandidate::rescaled};
    EXPECT_LE(hjb_residual(r), 1e-10);
    EXPECT_LE(continuity_residual_example(r), 1e-10);
  }
  const ExampleInstance s{2, 32, 16, ExampleCandidate::stationary};
  EXPECT_LE(hjb_residual(s), 1e-12);
  EXPECT_LE(continuity_residual_example(s), 1e-12);
}

TEST(Example, Validation) {
  EXPECT_THROW(hjb_residual(ExampleInstance{0, 32, 32, ExampleCandidate::periodic}), Error);
  EXPECT_THROW(hjb_residual(ExampleInstance{5, 100, 32, ExampleCandidate::periodic}), Error);
  EXPECT_EQ(parse_candidate("rescaled"), ExampleCandidate::rescaled);
  EXPECT_STREQ(to_string(ExampleCandidate::stationary), "stationary");
  EXPECT_THROW(parse_candidate("other"), Error);
}
