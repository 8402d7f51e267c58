#pragma once

// The coupled system: finite-horizon weak solutions by Hopf-Lax argmin
// backtracking, the time-periodic solution and c(m_T), and the Lipschitz and
// long-time experiments built on them.

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfgtorus/characteristics.hpp"
#include "mfgtorus/circle.hpp"
#include "mfgtorus/coupling.hpp"
#include "mfgtorus/error.hpp"
#include "mfgtorus/hamiltonian.hpp"
#include "mfgtorus/lax_oleinik.hpp"
#include "mfgtorus/measures.hpp"

namespace mfgtorus {

struct MFGSolution {
  ValueField u;
  std::vector<CircleMeasure> m_path;    // one density per u slice
  std::vector<double> coupling_values;  // F(m(t_k))
  double c = 0.0;
  std::map<std::string, std::string> metadata;

  std::span<const double> times() const { return u.times; }

  /// m(t) by linear interpolation of cell masses between slices.
  CircleMeasure measure_at(double t) const {
    const auto& ts = u.times;
    require(!ts.empty() && t >= ts.front() - 1e-12 && t <= ts.back() + 1e-12, "measure_at: time outside the path");
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    if (it == ts.end()) return m_path.back();
    const auto k = static_cast<std::size_t>(it - ts.begin());
    if (k == 0) return m_path.front();
    const double s = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
    const auto a = m_path[k - 1].masses(), b = m_path[k].masses();
    std::vector<double> m(a.size());
    double total = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) total += (m[i] = (1.0 - s) * a[i] + s * b[i]);
    for (double& v : m) v /= total;
    return CircleMeasure::density(std::move(m));
  }

  void write_m_csv(std::ostream& os) const {
    os << "t,x,mass\n";
    for (std::size_t k = 0; k < m_path.size(); ++k) {
      const auto m = m_path[k].masses();
      for (std::size_t i = 0; i < m.size(); ++i) {
        os << detail::format_double(u.times[k]) << ',' << detail::format_double(static_cast<double>(i) / static_cast<double>(m.size()))
           << ',' << detail::format_double(m[i]) << '\n';
      }
    }
  }
};

struct FiniteHorizonOptions {
  double dt = 1e-3;
  std::size_t save_every = 10;
  std::size_t particles_per_cell = 8;
};

namespace detail {

// Cloud-in-cell deposit onto the N nodes, renormalised to mass 1.
inline CircleMeasure deposit(std::span<const double> x, std::span<const double> w, std::size_t n) {
  std::vector<double> m(n, 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double s = x[j] * static_cast<double>(n);
    const double fl = std::floor(s);
    const double frac = s - fl;
    const std::size_t i0 = wrap_index(static_cast<std::ptrdiff_t>(fl), n);
    m[i0] += (1.0 - frac) * w[j];
    m[(i0 + 1) % n] += frac * w[j];
  }
  double total = 0.0;
  for (double v : m) total += v;
  for (double& v : m) v /= total;
  return CircleMeasure::density(std::move(m));
}

}  // namespace detail

/// u(x,t) = w(x,t) + int_0^t F(m(s)) ds + c t with w the Hopf-Lax evolution of phi and
/// m(t) the density m_T carried backward along the per-step argmin displacements.
inline MFGSolution solve_finite_horizon(std::span<const double> phi, const CircleMeasure& m_T, double c, double T,
                                        const HamiltonianModel& model, const CouplingFunctional& F,
                                        const FiniteHorizonOptions& opts = {}) {
  const std::size_t n = phi.size();
  require(m_T.is_density(), "solve_finite_horizon: m_T must be a density");
  require(m_T.size() == n, "solve_finite_horizon: m_T and phi must share the grid");
  require(T > 0.0, "solve_finite_horizon: horizon must be positive");
  require(opts.particles_per_cell >= 1, "solve_finite_horizon: need at least one particle per cell");
  for (double v : phi) require(std::isfinite(v), "solve_finite_horizon: non-finite initial value");
  const std::size_t steps = detail::step_count(T, opts.dt);
  require(opts.save_every >= 1 && steps % opts.save_every == 0, "step count must be a multiple of save_every");

  const HopfLaxKernel kernel(model, n, opts.dt);
  const double h = kernel.spacing();
  const double cutoff = static_cast<double>(kernel.reach()) * h * (1.0 - 1e-12);
  std::vector<float> disp(steps * n);
  std::vector<double> w(phi.begin(), phi.end()), next(n), d(n);

  MFGSolution sol;
  sol.c = c;
  sol.u.n = n;
  const std::size_t slices = steps / opts.save_every + 1;
  sol.u.times.reserve(slices);
  sol.u.slices.reserve(slices);
  auto save = [&](std::size_t k) {
    sol.u.times.push_back(static_cast<double>(k) * opts.dt);
    sol.u.slices.push_back(w);
  };
  save(0);
  for (std::size_t k = 0; k < steps; ++k) {
    kernel.step(w, next, d, false);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(d[i]) >= cutoff) {
        throw Error(ErrorCode::degenerate_backtrack, "argmin chain reaches the velocity cutoff at step " +
                                                         std::to_string(k) + ", node " + std::to_string(i));
      }
      disp[k * n + i] = static_cast<float>(d[i]);
    }
    w.swap(next);
    if ((k + 1) % opts.save_every == 0) save(k + 1);
  }

  // Sub-particles of m_T, carried from T down to 0.
  const std::size_t P = opts.particles_per_cell;
  std::vector<double> px(n * P), pw(n * P);
  const auto mt = m_T.masses();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < P; ++j) {
      px[i * P + j] = wrap((static_cast<double>(i) + (static_cast<double>(j) + 0.5) / static_cast<double>(P) - 0.5) * h);
      pw[i * P + j] = mt[i] / static_cast<double>(P);
    }
  }
  std::vector<CircleMeasure> path;
  path.reserve(slices);
  path.push_back(m_T);
  for (std::size_t k = steps; k-- > 0;) {
    const float* row = &disp[k * n];
    for (double& x : px) {
      const double s = x * static_cast<double>(n);
      const auto i0 = static_cast<std::size_t>(s) % n;
      const double frac = s - std::floor(s);
      const double shift = (1.0 - frac) * row[i0] + frac * row[(i0 + 1) % n];
      x = wrap(x - shift);
    }
    if (k % opts.save_every == 0) path.push_back(detail::deposit(px, pw, n));
  }
  std::reverse(path.begin(), path.end());
  sol.m_path = std::move(path);

  sol.coupling_values.resize(slices);
  for (std::size_t k = 0; k < slices; ++k) sol.coupling_values[k] = F.evaluate(sol.m_path[k]);
  const auto integral = cumulative_trapezoid(sol.u.times, sol.coupling_values);
  for (std::size_t k = 0; k < slices; ++k) {
    for (double& v : sol.u.slices[k]) v += integral[k] + c * sol.u.times[k];
  }
  sol.metadata = {{"model", model.id()},
                  {"coupling", F.id()},
                  {"n", std::to_string(n)},
                  {"dt", detail::format_double(opts.dt)},
                  {"horizon", detail::format_double(T)},
                  {"save_every", std::to_string(opts.save_every)},
                  {"particles_per_cell", std::to_string(P)}};
  return sol;
}

struct RegimeOptions {
  std::size_t n = 512;
  double t_probe = 50.0;
  CriticalValueOptions critical{};
  DriftOptions drift{};
};

/// c0, u0, the drift and its flow map, computed once per model.
struct PeriodicRegime {
  HamiltonianModel model;
  std::size_t n;
  CriticalValue critical;
  WeakKamSolution weak_kam;
  DriftField drift;
  FlowMap flow;

  double c0() const { return critical.c0; }
  double tau() const { return drift.tau(); }
  std::span<const double> u0() const { return weak_kam.u0; }
};

inline PeriodicRegime periodic_regime(const HamiltonianModel& model, const RegimeOptions& opts = {}) {
  auto cv = critical_value(model, opts.n, opts.t_probe, opts.critical);
  auto wk = weak_kam_solution(model, opts.n, cv.c0, opts.t_probe, opts.critical);
  auto df = drift_field(wk.u0, model, opts.drift);
  df.require_periodic("periodic_regime");
  FlowMap fm(df);
  return PeriodicRegime{model, opts.n, std::move(cv), std::move(wk), std::move(df), std::move(fm)};
}

struct PeriodicOptions {
  double dt = 1e-3;            // time step of the slice grid before coarsening by save_every
  std::size_t save_every = 10;
  std::size_t periods = 2;     // the path covers [0, periods * tau]
  PushforwardOptions push{};
};

struct PeriodicSolution {
  MFGSolution solution;  // u-bar, m-bar over [0, periods * tau], c = c(m_T)
  double tau = 0.0;
  double c0 = 0.0;
  double c_mT = 0.0;
  double mean_coupling = 0.0;       // (1/tau) int_0^tau F(m-bar)
  double periodicity_defect = 0.0;  // max_t d1(m-bar(t + tau), m-bar(t))
  double nontriviality_gap = 0.0;   // max_{t <= tau} d1(m-bar(t), m-bar(0))
  double invariant_distance = 0.0;  // d1(m_T, m*)
  double mass_drift = 0.0;          // worst push-forward renormalisation
};

namespace detail {

struct PeriodicPath {
  std::vector<double> times;
  std::vector<CircleMeasure> path;
  std::vector<double> coupling;
  std::size_t per_period = 0;
  double mass_drift = 0.0;
};

inline PeriodicPath periodic_path(const PeriodicRegime& regime, const CircleMeasure& m_T, const CouplingFunctional& F,
                                  const PeriodicOptions& opts) {
  require(m_T.is_density(), "periodic_solution: m_T must be a density");
  require(opts.periods >= 1 && opts.save_every >= 1 && opts.dt > 0.0, "periodic_solution: bad options");
  const double tau = regime.tau();
  PeriodicPath out;
  out.per_period = static_cast<std::size_t>(std::ceil(tau / (opts.dt * static_cast<double>(opts.save_every)) - 1e-9));
  const double step = tau / static_cast<double>(out.per_period);
  const std::size_t total = out.per_period * opts.periods;
  const double T = static_cast<double>(total) * step;
  for (std::size_t k = 0; k <= total; ++k) {
    const double t = k == total ? T : static_cast<double>(k) * step;
    auto r = pushforward_report(regime.flow, m_T, t, T, opts.push);
    out.mass_drift = std::max(out.mass_drift, r.mass_drift);
    out.times.push_back(t);
    out.coupling.push_back(F.evaluate(r.measure));
    out.path.push_back(std::move(r.measure));
  }
  return out;
}

inline double period_mean(const PeriodicPath& p, double tau) {
  return trapezoid(std::span(p.times).first(p.per_period + 1), std::span(p.coupling).first(p.per_period + 1)) / tau;
}

}  // namespace detail

/// m-bar(t) = Phi(t, T, .)_# m_T with T a multiple of tau, c(m_T) = c0 - mean of F(m-bar)
/// over a period, u-bar = u0 + int_0^t F(m-bar) - t * mean.
inline PeriodicSolution periodic_solution(const PeriodicRegime& regime, const CircleMeasure& m_T,
                                          const CouplingFunctional& F, const PeriodicOptions& opts = {}) {
  auto p = detail::periodic_path(regime, m_T, F, opts);
  PeriodicSolution out;
  out.tau = regime.tau();
  out.c0 = regime.c0();
  out.mean_coupling = detail::period_mean(p, out.tau);
  out.c_mT = out.c0 - out.mean_coupling;
  out.mass_drift = p.mass_drift;
  out.invariant_distance = wasserstein1(m_T, invariant_density(regime.drift));
  for (std::size_t k = 0; k + p.per_period < p.path.size(); ++k) {
    out.periodicity_defect = std::max(out.periodicity_defect, wasserstein1(p.path[k + p.per_period], p.path[k]));
  }
  for (std::size_t k = 1; k <= p.per_period; ++k) {
    out.nontriviality_gap = std::max(out.nontriviality_gap, wasserstein1(p.path[k], p.path[0]));
  }

  const std::size_t per_period = p.per_period;
  auto& sol = out.solution;
  sol.c = out.c_mT;
  sol.u.n = regime.n;
  sol.u.times = p.times;
  const auto integral = cumulative_trapezoid(p.times, p.coupling);
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    std::vector<double> slice(regime.u0().begin(), regime.u0().end());
    for (double& v : slice) v += integral[k] - p.times[k] * out.mean_coupling;
    sol.u.slices.push_back(std::move(slice));
  }
  sol.m_path = std::move(p.path);
  sol.coupling_values = std::move(p.coupling);
  sol.metadata = {{"model", regime.model.id()},
                  {"coupling", F.id()},
                  {"n", std::to_string(regime.n)},
                  {"t_probe", detail::format_double(regime.critical.t_probe)},
                  {"periods", std::to_string(opts.periods)},
                  {"slices_per_period", std::to_string(per_period)}};
  return out;
}

/// c(m_T) over a single period.
inline double critical_coupling_constant(const PeriodicRegime& regime, const CircleMeasure& m_T,
                                         const CouplingFunctional& F, PeriodicOptions opts = {}) {
  opts.periods = 1;
  const auto p = detail::periodic_path(regime, m_T, F, opts);
  return regime.c0() - detail::period_mean(p, regime.tau());
}

struct LipschitzEntry {
  double d1 = 0.0;
  double dc = 0.0;
  double ratio = 0.0;
};

struct LipschitzReport {
  std::vector<LipschitzEntry> entries;
  std::size_t excluded = 0;  // pairs at zero distance
  double k1 = 0.0;
  double c_f = 0.0;
  double bound = 0.0;  // C_f K1 + tolerance
  double max_ratio = 0.0;
  std::size_t violations = 0;
};

/// |c(m1) - c(m2)| / d1(m1, m2) against C_f K1, K1 the flow Lipschitz constant over one period.
inline LipschitzReport lipschitz_c_experiment(const PeriodicRegime& regime,
                                              std::span<const std::pair<CircleMeasure, CircleMeasure>> pairs,
                                              const CouplingFunctional& F, const PeriodicOptions& opts = {},
                                              double tolerance = 1e-9) {
  LipschitzReport out;
  out.k1 = flow_lipschitz_constant(regime.drift, regime.tau()).k1;
  out.c_f = F.lipschitz_constant();
  out.bound = out.c_f * out.k1 + tolerance;
  for (const auto& [m1, m2] : pairs) {
    const double d1 = wasserstein1(m1, m2);
    if (d1 <= 1e-14) {
      ++out.excluded;
      continue;
    }
    const double dc = std::abs(critical_coupling_constant(regime, m1, F, opts) - critical_coupling_constant(regime, m2, F, opts));
    const LipschitzEntry e{d1, dc, dc / d1};
    out.max_ratio = std::max(out.max_ratio, e.ratio);
    if (e.ratio > out.bound) ++out.violations;
    out.entries.push_back(e);
  }
  return out;
}

struct ConvergenceRow {
  double horizon = 0.0;
  double d1_deviation = 0.0;  // sup_{s in [T - t, T]} d1(m(s), m-bar(s))
  double u_deviation = 0.0;   // sup over x and s of the shifted value gap
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  double window = 0.0;
  double c_mT = 0.0;
  double kappa = 0.0;  // constant selecting the u0 reached from phi
};

struct ConvergenceOptions {
  FiniteHorizonOptions finite{};
  PeriodicOptions periodic{};
  double kappa_factor = 2.0;  // kappa from the evolution of phi up to this multiple of the largest horizon
};

/// For each horizon T: the finite-horizon solution with c = c(m_T) against the periodic
/// solution with the same terminal phase, on the window [T - t, T]. u-bar uses the weak KAM
/// solution u0 + kappa, kappa = lim (w + c0 t - u0) estimated on a longer run.
inline ConvergenceReport long_time_convergence_experiment(const PeriodicRegime& regime, std::span<const double> phi,
                                                          const CircleMeasure& m_T, const CouplingFunctional& F,
                                                          std::span<const double> horizons, double window,
                                                          const ConvergenceOptions& opts = {}) {
  require(!horizons.empty(), "long_time_convergence_experiment: no horizons");
  require(window > 0.0, "long_time_convergence_experiment: window must be positive");
  require(phi.size() == regime.n, "long_time_convergence_experiment: phi must live on the regime grid");
  ConvergenceReport out;
  out.window = window;
  out.c_mT = critical_coupling_constant(regime, m_T, F, opts.periodic);
  const double mean = regime.c0() - out.c_mT;

  const double t_max = *std::max_element(horizons.begin(), horizons.end());
  const double t_ref = std::round(opts.kappa_factor * t_max / opts.finite.dt) * opts.finite.dt;
  {
    const HopfLaxKernel kernel(regime.model, regime.n, opts.finite.dt);
    std::vector<double> w(phi.begin(), phi.end()), next(regime.n);
    for (std::size_t k = 0, steps = detail::step_count(t_ref, opts.finite.dt); k < steps; ++k) {
      kernel.step(w, next);
      w.swap(next);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < regime.n; ++i) s += w[i] + regime.c0() * t_ref - regime.u0()[i];
    out.kappa = s / static_cast<double>(regime.n);
  }

  for (double T : horizons) {
    require(window <= T, "long_time_convergence_experiment: window exceeds the horizon");
    const auto sol = solve_finite_horizon(phi, m_T, out.c_mT, T, regime.model, F, opts.finite);
    const auto& ts = sol.u.times;
    const auto first = static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), T - window - 1e-9) - ts.begin());
    const auto cum_m = cumulative_trapezoid(ts, sol.coupling_values);

    ConvergenceRow row;
    row.horizon = T;
    double gap_integral = 0.0;  // int_{T - t}^{s} F(m-bar)
    double prev_bar = 0.0;
    for (std::size_t k = first; k < ts.size(); ++k) {
      const auto bar = pushforward(regime.flow, m_T, ts[k], T, opts.periodic.push);
      const double f_bar = F.evaluate(bar);
      if (k > first) gap_integral += 0.5 * (ts[k] - ts[k - 1]) * (f_bar + prev_bar);
      prev_bar = f_bar;
      row.d1_deviation = std::max(row.d1_deviation, wasserstein1(sol.m_path[k], bar));
      // u(x,s) - int_0^{T-t} F(m) - [u0 + kappa + int_{T-t}^s F(m-bar) - s * mean]
      const double shift = cum_m[first];
      for (std::size_t i = 0; i < regime.n; ++i) {
        const double dev = sol.u.slices[k][i] - shift - regime.u0()[i] - out.kappa - gap_integral + ts[k] * mean;
        row.u_deviation = std::max(row.u_deviation, std::abs(dev));
      }
    }
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace mfgtorus
