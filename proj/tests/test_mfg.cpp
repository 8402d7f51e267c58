#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "mfgtorus/mfg.hpp"

using namespace mfgtorus;

namespace {

const HamiltonianModel drift_model = HamiltonianModel::quadratic_drift();

double spread(std::span<const double> a, std::span<const double> b) {
  double lo = a[0] - b[0], hi = lo;
  for (std::size_t i = 0; i < a.size(); ++i) {
    lo = std::min(lo, a[i] - b[i]);
    hi = std::max(hi, a[i] - b[i]);
  }
  return hi - lo;
}

// m-bar(x, t) = 1 + cos(2 pi (x + t - T)) for v = -1
CircleMeasure rotated(double t, double T, std::size_t n) {
  return CircleMeasure::from_density_function([&](double x) { return 1.0 + std::cos(two_pi * (x + t - T)); }, n);
}

class DriftRegime : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { regime_ = new PeriodicRegime(periodic_regime(drift_model, {256, 20.0, {}, {}})); }
  static void TearDownTestSuite() {
    delete regime_;
    regime_ = nullptr;
  }
  static PeriodicRegime* regime_;
};

PeriodicRegime* DriftRegime::regime_ = nullptr;

}  // namespace

TEST(FiniteHorizon, DecoupledLimit) {
  const std::size_t n = 256;
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) phi[i] = 0.05 * std::cos(two_pi * i / 256.0);
  const auto m_T = make_measure("one-plus-cosine", n);
  const auto sol = solve_finite_horizon(phi, m_T, 0.0, 1.0, drift_model, CouplingFunctional::zero());
  const auto w = evolve(phi, 1.0, drift_model, std::span<const double>{}, {1e-3, 10, false});
  ASSERT_EQ(sol.u.slices.size(), w.slices.size());
  for (std::size_t k = 0; k < w.slices.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(sol.u.slices[k][i], w.slices[k][i]);
  }
  EXPECT_EQ(sol.metadata.at("coupling"), "zero");
  EXPECT_EQ(sol.metadata.at("n"), "256");
}

TEST(FiniteHorizon, QuadraticDriftClosedForm) {
  const std::size_t n = 512;
  const double T = 3.0;
  const auto F = CouplingFunctional::cosine4pi();
  const auto sol = solve_finite_horizon(std::vector<double>(n, 0.0), make_measure("one-plus-cosine", n), 0.0, T,
                                        drift_model, F);
  double du = 0.0, dm = 0.0, lip = 0.0;
  const auto& ts = sol.u.times;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    for (double v : sol.u.slices[k]) du = std::max(du, std::abs(v - std::sin(two_pi * ts[k])));
    dm = std::max(dm, wasserstein1(sol.m_path[k], rotated(ts[k], T, n)));
    if (k > 0) lip = std::max(lip, wasserstein1(sol.m_path[k], sol.m_path[k - 1]) / (ts[k] - ts[k - 1]));
  }
  EXPECT_LE(du, 1e-2);
  EXPECT_LE(dm, 5e-3);
  // |v| = 1 bounds the time modulus of the path
  EXPECT_LE(lip, 1.0 + 1e-3);
  EXPECT_EQ(sol.m_path.back().masses()[7], make_measure("one-plus-cosine", n).masses()[7]);
}

TEST(FiniteHorizon, FixedPointReSolve) {
  const std::size_t n = 256;
  const auto F = CouplingFunctional::cosine4pi();
  const auto sol = solve_finite_horizon(std::vector<double>(n, 0.0), make_measure("gaussian-bump(0.2, 0.1)", n), 0.3,
                                        2.0, drift_model, F);
  // the produced coupling samples, linearly interpolated to the step times, as the source
  const std::size_t steps = 2000;
  std::vector<double> source(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const std::size_t j = std::min<std::size_t>(k / 10, sol.coupling_values.size() - 2);
    const double s = static_cast<double>(k - 10 * j) / 10.0;
    source[k] = 0.3 + (1.0 - s) * sol.coupling_values[j] + s * sol.coupling_values[j + 1];
  }
  const auto again = evolve(std::vector<double>(n, 0.0), 2.0, drift_model, source, {1e-3, 10, false});
  for (std::size_t k = 0; k < again.slices.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(again.slices[k][i], sol.u.slices[k][i], 1e-10);
  }
}

TEST(FiniteHorizon, GradientDecoupling) {
  const std::size_t n = 256;
  const auto pend = HamiltonianModel::mechanical(2.0, Potential::cosine());
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) phi[i] = 0.1 * std::sin(two_pi * i / 256.0);
  const auto m_T = make_measure("one-plus-cosine", n);
  const auto a = solve_finite_horizon(phi, m_T, 0.0, 1.0, pend, CouplingFunctional::cosine4pi());
  const auto b = solve_finite_horizon(phi, m_T, 0.7, 1.0, pend, CouplingFunctional::zero());
  for (std::size_t k = 0; k < a.u.slices.size(); ++k) EXPECT_LE(spread(a.u.slices[k], b.u.slices[k]), 1e-10);
}

TEST(FiniteHorizon, Errors) {
  const auto free_model = HamiltonianModel::mechanical(0.0, Potential::zero());
  std::vector<double> steep(256);
  for (std::size_t i = 0; i < steep.size(); ++i) steep[i] = 5.0 * std::sin(two_pi * i / 256.0);
  try {
    solve_finite_horizon(steep, make_measure("lebesgue", 256), 0.0, 0.1, free_model, CouplingFunctional::zero());
    FAIL() << "expected degenerate-backtrack";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_backtrack);
  }
  EXPECT_THROW(solve_finite_horizon(std::vector<double>(256, 0.0), make_measure("delta(0.1)", 256), 0.0, 1.0, free_model,
                                    CouplingFunctional::zero()),
               Error);
  EXPECT_THROW(solve_finite_horizon(std::vector<double>(256, 0.0), make_measure("lebesgue", 128), 0.0, 1.0, free_model,
                                    CouplingFunctional::zero()),
               Error);
}

TEST(FiniteHorizon, MeasureInterpolationAndCsv) {
  const std::size_t n = 64;
  const auto sol = solve_finite_horizon(std::vector<double>(n, 0.0), make_measure("one-plus-cosine", n), 0.0, 0.1,
                                        drift_model, CouplingFunctional::zero(), {1e-2, 5, 4});
  ASSERT_EQ(sol.times().size(), 3u);
  const auto mid = sol.measure_at(0.025);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(mid.masses()[i], 0.5 * (sol.m_path[0].masses()[i] + sol.m_path[1].masses()[i]), 1e-15);
  }
  EXPECT_THROW(sol.measure_at(0.2), Error);
  std::ostringstream os;
  sol.write_m_csv(os);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, 9), "t,x,mass\n");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 3 * 64);
}

TEST(Periodic, NotPeriodicRegime) {
  try {
    periodic_regime(HamiltonianModel::mechanical(0.0, Potential::cosine()), {256, 50.0, {}, {}});
    FAIL() << "expected not-periodic-regime";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_periodic_regime);
  }
}

TEST_F(DriftRegime, ClosedFormPeriodicSolution) {
  EXPECT_NEAR(regime_->c0(), 0.0, 1e-3);
  EXPECT_NEAR(regime_->tau(), 1.0, 1e-9);
  const auto ps = periodic_solution(*regime_, make_measure("one-plus-cosine", 256), CouplingFunctional::cosine4pi());
  EXPECT_NEAR(ps.c_mT, 0.0, 1e-3);
  const auto& sol = ps.solution;
  const double T = sol.u.times.back();
  EXPECT_NEAR(T, 2.0, 1e-12);
  for (std::size_t k = 0; k < sol.u.times.size(); ++k) {
    for (double v : sol.u.slices[k]) EXPECT_NEAR(v, std::sin(two_pi * sol.u.times[k]), 1e-2);
    EXPECT_LE(wasserstein1(sol.m_path[k], rotated(sol.u.times[k], T, 256)), 5e-3);
  }
  EXPECT_LE(ps.periodicity_defect, 1e-4);
  EXPECT_GE(ps.nontriviality_gap, 1e-3);
  EXPECT_GE(ps.invariant_distance, 1e-2);
  EXPECT_EQ(sol.metadata.at("slices_per_period"), "100");
}

TEST_F(DriftRegime, InvariantDensityIsStationary) {
  const auto m_star = invariant_density(regime_->drift);
  const auto F = CouplingFunctional::fourier(0.2, {1.0}, {0.5});
  const auto ps = periodic_solution(*regime_, m_star, F);
  EXPECT_LE(ps.nontriviality_gap, 1e-6);
  EXPECT_NEAR(ps.c_mT, regime_->c0() - F(m_star), 1e-9);
  EXPECT_LE(ps.invariant_distance, 1e-12);
}

TEST_F(DriftRegime, WrongConstantGrowsLinearly) {
  const auto m_T = make_measure("one-plus-cosine", 256);
  const auto F = CouplingFunctional::cosine4pi();
  const double c = critical_coupling_constant(*regime_, m_T, F);
  const std::vector<double> phi(regime_->u0().begin(), regime_->u0().end());
  for (double delta : {0.0, 0.1, -0.25}) {
    const auto sol = solve_finite_horizon(phi, m_T, c + delta, 4.0, drift_model, F);
    for (int periods = 1; periods <= 4; ++periods) {
      const auto& end = sol.u.slices[static_cast<std::size_t>(100 * periods)];
      double gap = 0.0;
      for (std::size_t i = 0; i < 256; ++i) gap = std::max(gap, std::abs(end[i] - sol.u.slices[0][i]));
      EXPECT_NEAR(gap, std::abs(delta) * periods, 1e-3);
    }
  }
}

TEST_F(DriftRegime, LipschitzExperimentOnRotations) {
  std::vector<std::pair<CircleMeasure, CircleMeasure>> pairs;
  pairs.emplace_back(make_measure("one-plus-cosine", 256), make_measure("one-plus-cosine", 256));
  for (double theta : {0.1, 0.3, 0.45}) {
    pairs.emplace_back(make_measure("one-plus-cosine", 256), make_measure("one-plus-cosine(" + std::to_string(-theta) + ")", 256));
  }
  std::mt19937_64 rng(31);
  for (int k = 0; k < 4; ++k) pairs.emplace_back(random_fourier_density(rng, 256), random_fourier_density(rng, 256));
  const auto F = CouplingFunctional::cosine4pi();
  const auto rep = lipschitz_c_experiment(*regime_, pairs, F);
  EXPECT_EQ(rep.excluded, 1u);
  EXPECT_EQ(rep.entries.size(), pairs.size() - 1);
  EXPECT_NEAR(rep.k1, 1.0, 1e-9);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_LE(rep.entries[k].dc, 1e-9);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_LE(rep.max_ratio, rep.bound);
}

TEST_F(DriftRegime, ConvergenceFromWeakKamDataIsImmediate) {
  const std::vector<double> phi(regime_->u0().begin(), regime_->u0().end());
  const std::vector<double> horizons{1.0, 2.0};
  const auto rep = long_time_convergence_experiment(*regime_, phi, make_measure("one-plus-cosine", 256),
                                                    CouplingFunctional::cosine4pi(), horizons, 0.5);
  ASSERT_EQ(rep.rows.size(), 2u);
  for (const auto& row : rep.rows) {
    EXPECT_LE(row.d1_deviation, 1e-3);
    EXPECT_LE(row.u_deviation, 1e-3);
  }
  EXPECT_NEAR(rep.kappa, 0.0, 1e-9);
}

TEST(Periodic, ShiftedPendulumRegime) {
  const auto model = HamiltonianModel::mechanical(2.0, Potential::cosine());
  const auto regime = periodic_regime(model, {256, 50.0, {}, {}});
  EXPECT_TRUE(regime.drift.periodic());
  const auto ps = periodic_solution(regime, make_measure("gaussian-bump(0.5, 0.1)", 256), CouplingFunctional::cosine4pi());
  EXPECT_LE(ps.periodicity_defect, 1e-4);
  EXPECT_GE(ps.invariant_distance, 1e-2);
  EXPECT_GE(ps.nontriviality_gap, 1e-3);
  EXPECT_LT(ps.mass_drift, 1e-4);
  // initial-data forcing: Dw(., n tau) approaches Du0 away from kinks
  std::vector<double> phi(256);
  for (std::size_t i = 0; i < 256; ++i) phi[i] = 0.3 * std::cos(two_pi * i / 256.0);
  const auto w = evolve(phi, 20.0, model, std::span<const double>{}, {1e-3, 1000, true});
  const auto dw = centered_gradient(w.back());
  const auto du0 = centered_gradient(regime.u0());
  double gap = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    if (!regime.weak_kam.kink[i]) gap = std::max(gap, std::abs(dw[i] - du0[i]));
  }
  EXPECT_LE(gap, 5e-2);
}
