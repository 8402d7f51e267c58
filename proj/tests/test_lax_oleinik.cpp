#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "mfgtorus/lax_oleinik.hpp"
#include "oracles.hpp"

using namespace mfgtorus;

namespace {

std::vector<double> sample(std::size_t n, double (*f)(double)) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = f(static_cast<double>(i) / static_cast<double>(n));
  return v;
}

double cos2pi(double x) { return std::cos(two_pi * x); }

const HamiltonianModel free_model = HamiltonianModel::mechanical(0.0, Potential::zero());
const HamiltonianModel pendulum = HamiltonianModel::mechanical(0.0, Potential::cosine());
const HamiltonianModel drift = HamiltonianModel::quadratic_drift();
const std::span<const double> no_source{};

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
  return e;
}

}  // namespace

TEST(HopfLax, ZeroDataStaysZero) {
  for (double dt : {1e-3, 1e-2, 0.1}) {
    const auto w = hopf_lax_step(std::vector<double>(128, 0.0), dt, free_model);
    for (double v : w) EXPECT_NEAR(v, 0.0, 1e-15);
  }
  const auto w = hopf_lax_step(std::vector<double>(256, 0.0), 1e-3, drift);
  for (double v : w) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(HopfLax, MatchesFineGridOracle) {
  const std::size_t n = 512;
  const auto phi = sample(n, cos2pi);
  const auto w = hopf_lax_step(phi, 0.1, free_model);
  const auto ref = oracle::free_hopf_lax([](double z) { return std::cos(two_pi * z); }, 0.1, n, 10 * n);
  EXPECT_LT(max_abs_diff(w, ref), 1e-4);
}

TEST(HopfLax, CutoffHitRaises) {
  std::vector<double> phi(512);
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = 5.0 * std::sin(two_pi * i / 512.0);
  try {
    hopf_lax_step(phi, 1e-3, free_model);
    FAIL() << "expected velocity-cutoff-exceeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::velocity_cutoff_exceeded);
  }
}

TEST(HopfLax, RejectsUnreachableStencil) {
  EXPECT_THROW(HopfLaxKernel(free_model, 512, 1e-4), Error);
  EXPECT_THROW(hopf_lax_step(std::vector<double>(64, NAN), 1e-2, free_model), Error);
}

TEST(HopfLax, DisplacementIsVelocityTimesStep) {
  const HopfLaxKernel k(drift, 256, 1e-2);
  std::vector<double> w(256, 0.0), next(256), d(256);
  k.step(w, next, d);
  for (double v : d) EXPECT_NEAR(v, -1e-2, 1e-12);  // v = dH/dp(0) = -1
}

TEST(Evolve, ConstantSource) {
  EvolveOptions o;
  o.dt = 1e-2;
  const auto f = evolve(std::vector<double>(64, 0.0), 1.0, free_model, [](double) { return 0.7; }, o);
  ASSERT_EQ(f.times.size(), 101u);
  for (std::size_t k = 0; k < f.times.size(); ++k) {
    for (double v : f.slices[k]) EXPECT_NEAR(v, 0.7 * f.times[k], 1e-12);
  }
}

TEST(Evolve, OscillatingSourceWithDrift) {
  const auto f = evolve(std::vector<double>(256, 0.0), 1.0, drift, [](double t) { return two_pi * std::cos(two_pi * t); });
  for (std::size_t k = 0; k < f.times.size(); ++k) {
    for (double v : f.slices[k]) EXPECT_NEAR(v, std::sin(two_pi * f.times[k]), 1e-3);
  }
}

TEST(Evolve, SemigroupProperty) {
  const auto phi = sample(128, cos2pi);
  EvolveOptions o;
  o.dt = 1e-2;
  const auto full = evolve(phi, 2.0, pendulum, no_source, o);
  const auto first = evolve(phi, 0.8, pendulum, no_source, o);
  const auto second = evolve(first.back(), 1.2, pendulum, no_source, o);
  EXPECT_LT(max_abs_diff(full.back(), second.back()), 1e-6);
  EXPECT_LT(max_abs_diff(full.slices[150], second.slices[70]), 1e-6);
}

TEST(Evolve, MonotoneAndTranslationInvariant) {
  const auto phi = sample(128, cos2pi);
  auto higher = phi;
  for (std::size_t i = 0; i < higher.size(); ++i) higher[i] += 0.1 * (1.0 + std::sin(7.0 * i));
  auto shifted = phi;
  for (double& v : shifted) v += 0.5;
  EvolveOptions o;
  o.dt = 1e-2;
  const auto a = evolve(phi, 1.0, pendulum, no_source, o);
  const auto b = evolve(higher, 1.0, pendulum, no_source, o);
  const auto c = evolve(shifted, 1.0, pendulum, no_source, o);
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    for (std::size_t i = 0; i < 128; ++i) {
      EXPECT_LE(a.slices[k][i], b.slices[k][i] + 1e-14);
      EXPECT_NEAR(c.slices[k][i], a.slices[k][i] + 0.5, 1e-12);
    }
  }
}

TEST(Evolve, EquiSemiconcaveAndEquiLipschitz) {
  const auto phi = sample(256, cos2pi);
  EvolveOptions o;
  o.dt = 1e-2;
  const auto f = evolve(phi, 5.0, pendulum, no_source, o);
  const double c_sc = semiconcavity_constant(f.slices[100]);
  const double lip = lipschitz_constant(f.slices[100]);
  for (std::size_t k = 100; k < f.times.size(); ++k) {
    EXPECT_LE(semiconcavity_constant(f.slices[k]), 2.0 * std::max(c_sc, 1.0));
    EXPECT_LE(lipschitz_constant(f.slices[k]), 1.1 * lip + 0.1);
  }
}

TEST(Evolve, RequiresIntegerStepCount) {
  EXPECT_THROW(evolve(std::vector<double>(64, 0.0), 0.0105, free_model, no_source, {1e-2, 1, true}), Error);
  EXPECT_THROW(evolve(std::vector<double>(64, 0.0), 1.0, free_model, std::vector<double>(3, 0.0), {0.01, 1, true}), Error);
}

TEST(Evolve, CsvHeader) {
  const auto f = evolve(std::vector<double>(8, 0.0), 0.2, HamiltonianModel::mechanical(0.0, Potential::zero()), no_source,
                        {0.1, 1, true});
  std::ostringstream os;
  f.write_csv(os);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, 6), "t,x,w\n");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 3 * 8);
}

TEST(MinimalAction, FreeParticleClosedForm) {
  const std::size_t n = 128;
  EXPECT_NEAR(minimal_action(free_model, n, 10, 10, 1.0), 0.0, 2e-3);
  EXPECT_NEAR(minimal_action(free_model, n, 10, 10 + n / 4, 1.0), 0.03125, 2e-3);
  EXPECT_NEAR(minimal_action(free_model, n, 100, 100 - n / 4, 1.0), 0.03125, 2e-3);
}

TEST(MinimalAction, Subadditive) {
  const std::size_t n = 64;
  for (auto [x, y] : {std::pair<std::size_t, std::size_t>{0, 20}, {5, 40}, {63, 31}}) {
    const double whole = minimal_action(pendulum, n, x, y, 1.0);
    double best = 1e300;
    for (std::size_t z = 0; z < n; z += 3) {
      best = std::min(best, minimal_action(pendulum, n, x, z, 0.5) + minimal_action(pendulum, n, z, y, 0.5));
    }
    EXPECT_LE(whole, best + 1e-3);
  }
}

TEST(CriticalValue, DriftAndFreeModelsAreZero) {
  EXPECT_NEAR(critical_value(drift, 256, 20.0).c0, 0.0, 1e-3);
  EXPECT_NEAR(critical_value(free_model, 256, 20.0).c0, 0.0, 1e-3);
}

TEST(CriticalValue, PendulumSlopeIsMaxV) {
  const auto cv = critical_value(pendulum, 512, 50.0);
  EXPECT_NEAR(cv.c0, 1.0, 1e-2);
  EXPECT_LE(cv.diagnostic, 1e-2);
  EXPECT_EQ(cv.t_probe, 50.0);
  // doubling N moves c0 by less than twice the tolerance
  EXPECT_LT(std::abs(critical_value(pendulum, 256, 50.0).c0 - cv.c0), 2e-2);
}

TEST(CriticalValue, Errors) {
  EXPECT_THROW(critical_value(pendulum, 128, 10.0), Error);
  CriticalValueOptions strict;
  strict.tolerance = 1e-14;
  strict.dt = 1e-2;
  const auto shifted = HamiltonianModel::mechanical(2.0, Potential::cosine());
  try {
    critical_value(shifted, 128, 20.0, strict);
    FAIL() << "expected not-converged";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_converged);
  }
}

TEST(WeakKam, DriftAndFreeModelsAreFlat) {
  for (const auto& m : {drift, free_model}) {
    const auto wk = weak_kam_solution(m, 128, 0.0, 20.0);
    for (double v : wk.u0) EXPECT_NEAR(v, 0.0, 1e-12);
  }
}

TEST(WeakKam, PendulumResidual) {
  const auto cv = critical_value(pendulum, 512, 50.0);
  const auto wk = weak_kam_solution(pendulum, 512, cv.c0, 50.0);
  EXPECT_LE(wk.residual, 5e-2);
  EXPECT_EQ(*std::min_element(wk.u0.begin(), wk.u0.end()), 0.0);
  EXPECT_GE(wk.semiconcavity, 1.0);
  // the single concave kink of sqrt(2(1 - V)) sits opposite the maximum of V
  std::size_t kinks = 0;
  for (std::size_t i = 0; i < wk.kink.size(); ++i) {
    if (wk.kink[i]) {
      ++kinks;
      EXPECT_NEAR(static_cast<double>(i) / 512.0, 0.5, 0.02);
    }
  }
  EXPECT_GE(kinks, 1u);
}

TEST(Alpha, FreeModelIsHalfSquare) {
  for (double a : {0.5, 1.0, -1.5}) EXPECT_NEAR(alpha_function(free_model, a, 256, 20.0), 0.5 * a * a, 1e-2);
  EXPECT_THROW(alpha_function(drift, 0.0, 64, 20.0), Error);
}

TEST(Alpha, DoubleWellPlateau) {
  const auto dw = HamiltonianModel::mechanical(0.0, Potential::double_well(0.5, 1.0));
  const double a0 = plateau_half_width(dw.potential());
  // int_0^1 sqrt(2) |sin(pi x) sin(pi (x - 1/2))| dx = sqrt(2) / pi
  EXPECT_NEAR(a0, std::sqrt(2.0) / std::numbers::pi, 1e-6);
  EXPECT_LE(alpha_function(dw, 0.0, 256, 20.0), 1e-2);
  EXPECT_GT(alpha_function(dw, 1.5 * a0, 256, 20.0), 1e-2);
}
