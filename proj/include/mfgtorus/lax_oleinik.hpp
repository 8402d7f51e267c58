#pragma once

// Value-function evolution by the Lax-Oleinik semigroup on a uniform circle
// grid, and the long-time quantities built on it: minimal action, critical
// value, weak KAM solution and the alpha function.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "mfgtorus/circle.hpp"
#include "mfgtorus/error.hpp"
#include "mfgtorus/hamiltonian.hpp"

namespace mfgtorus {

/// Space-time samples of the value function: slices[k][i] = w(i/N, times[k]).
struct ValueField {
  std::size_t n = 0;
  std::vector<double> times;
  std::vector<std::vector<double>> slices;

  double spacing() const { return 1.0 / static_cast<double>(n); }
  const std::vector<double>& back() const { return slices.back(); }

  void write_csv(std::ostream& os) const {
    os << "t,x,w\n";
    for (std::size_t k = 0; k < times.size(); ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        os << detail::format_double(times[k]) << ',' << detail::format_double(static_cast<double>(i) * spacing())
           << ',' << detail::format_double(slices[k][i]) << '\n';
      }
    }
  }
};

/// One Hopf-Lax step on a fixed grid and time step. The per-node Lagrangian
/// costs dt * L(x_i, k h / dt) are tabulated once at construction.
class HopfLaxKernel {
 public:
  HopfLaxKernel(const HamiltonianModel& model, std::size_t n, double dt) : n_(n), dt_(dt) {
    require(model.dimension() == 1, "Hopf-Lax grids are one-dimensional");
    require(n >= 8, "grid needs at least 8 nodes");
    require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
    h_ = 1.0 / static_cast<double>(n);
    const double vmax = model.cutoffs().velocity;
    reach_ = static_cast<std::ptrdiff_t>(std::floor(vmax * dt / h_ + 1e-9));
    require(reach_ >= 1, "dt is below the stencil reach h/Vmax: no neighbouring node is reachable");
    width_ = static_cast<std::size_t>(2 * reach_ + 1);
    cost_.resize(n_ * width_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double x = static_cast<double>(i) * h_;
      for (std::ptrdiff_t k = -reach_; k <= reach_; ++k) {
        const double v = static_cast<double>(k) * h_ / dt;
        cost_[i * width_ + static_cast<std::size_t>(k + reach_)] = dt * lagrangian(model, x, v).value;
      }
    }
  }

  std::size_t size() const { return n_; }
  double dt() const { return dt_; }
  double spacing() const { return h_; }
  std::ptrdiff_t reach() const { return reach_; }

  /// w_next[i] = min_y w(y) + dt L(x_i, (x_i - y)/dt) over lifted origins within the reach,
  /// refined by the vertex of the parabola through the discrete minimum and its neighbours.
  /// If `displacement` is given it receives x_i - origin_i.
  void step(std::span<const double> w, std::span<double> w_next, std::span<double> displacement = {},
            bool check_cutoff = true) const {
    require(w.size() == n_ && w_next.size() == n_, "Hopf-Lax step: size mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
      const double* cost = &cost_[i * width_];
      const auto ii = static_cast<std::ptrdiff_t>(i);
      auto f = [&](std::ptrdiff_t k) {
        return w[wrap_index(ii - k, n_)] + cost[static_cast<std::size_t>(k + reach_)];
      };
      std::ptrdiff_t best = -reach_;
      double best_value = f(best);
      for (std::ptrdiff_t k = -reach_ + 1; k <= reach_; ++k) {
        const double value = f(k);
        if (value < best_value) {  // strict: ties keep the smaller signed displacement
          best_value = value;
          best = k;
        }
      }
      double offset = 0.0;
      if (best == -reach_ || best == reach_) {
        if (check_cutoff) {
          throw Error(ErrorCode::velocity_cutoff_exceeded,
                      "Hopf-Lax argmin sits on the velocity cutoff at node " + std::to_string(i));
        }
      } else {
        const double fm = f(best - 1), fp = f(best + 1);
        const double curv = fp + fm - 2.0 * best_value;
        if (curv > 0.0) {
          const double slope = 0.5 * (fp - fm);
          offset = -slope / curv;
          best_value -= 0.5 * slope * slope / curv;
        }
      }
      w_next[i] = best_value;
      if (!displacement.empty()) displacement[i] = (static_cast<double>(best) + offset) * h_;
    }
  }

  std::vector<double> step(std::span<const double> w, bool check_cutoff = true) const {
    std::vector<double> out(n_);
    step(w, out, {}, check_cutoff);
    return out;
  }

 private:
  std::size_t n_;
  double dt_;
  double h_ = 0.0;
  std::ptrdiff_t reach_ = 0;
  std::size_t width_ = 0;
  std::vector<double> cost_;
};

inline std::vector<double> hopf_lax_step(std::span<const double> w, double dt, const HamiltonianModel& model) {
  for (double v : w) require(std::isfinite(v), "Hopf-Lax step: non-finite value");
  return HopfLaxKernel(model, w.size(), dt).step(w);
}

struct EvolveOptions {
  double dt = 1e-3;
  std::size_t save_every = 1;  // store every k-th step
  bool check_cutoff = true;
};

namespace detail {

inline std::size_t step_count(double horizon, double dt) {
  require(horizon >= 0.0 && dt > 0.0, "horizon must be >= 0 and dt > 0");
  const double k = std::round(horizon / dt);
  require(std::abs(k * dt - horizon) <= 1e-9 * std::max(1.0, horizon), "horizon must be an integer multiple of dt");
  return static_cast<std::size_t>(k);
}

}  // namespace detail

/// Iterated Hopf-Lax steps from phi plus the x-independent source integral
/// int_0^t s (trapezoid). `source` holds s at the K+1 step times, or is empty for s = 0.
inline ValueField evolve(std::span<const double> phi, double horizon, const HamiltonianModel& model,
                         std::span<const double> source = {}, const EvolveOptions& opts = {}) {
  const std::size_t steps = detail::step_count(horizon, opts.dt);
  require(opts.save_every >= 1 && steps % opts.save_every == 0, "step count must be a multiple of save_every");
  require(source.empty() || source.size() == steps + 1, "source must have one sample per step time");
  for (double v : phi) require(std::isfinite(v), "evolve: non-finite initial value");

  const HopfLaxKernel kernel(model, phi.size(), opts.dt);
  std::vector<double> integral(steps + 1, 0.0);
  for (std::size_t k = 1; k <= steps && !source.empty(); ++k) {
    integral[k] = integral[k - 1] + 0.5 * opts.dt * (source[k] + source[k - 1]);
  }

  ValueField field;
  field.n = phi.size();
  std::vector<double> w(phi.begin(), phi.end()), next(phi.size());
  auto save = [&](std::size_t k) {
    field.times.push_back(static_cast<double>(k) * opts.dt);
    std::vector<double> slice = w;
    for (double& v : slice) v += integral[k];
    field.slices.push_back(std::move(slice));
  };
  save(0);
  for (std::size_t k = 1; k <= steps; ++k) {
    kernel.step(w, next, {}, opts.check_cutoff);
    w.swap(next);
    if (k % opts.save_every == 0) save(k);
  }
  return field;
}

/// Overload sampling a callable source at the step times.
inline ValueField evolve(std::span<const double> phi, double horizon, const HamiltonianModel& model,
                         const std::function<double(double)>& source, const EvolveOptions& opts = {}) {
  const std::size_t steps = detail::step_count(horizon, opts.dt);
  std::vector<double> s(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) s[k] = source(static_cast<double>(k) * opts.dt);
  return evolve(phi, horizon, model, std::span<const double>(s), opts);
}

/// max_i (w_{i+1} - 2 w_i + w_{i-1}) / h^2: the discrete semi-concavity constant.
inline double semiconcavity_constant(std::span<const double> w) {
  const std::size_t n = w.size();
  const double inv_h2 = static_cast<double>(n) * static_cast<double>(n);
  double c = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    c = std::max(c, (w[(i + 1) % n] - 2.0 * w[i] + w[(i + n - 1) % n]) * inv_h2);
  }
  return c;
}

inline double lipschitz_constant(std::span<const double> w) {
  const std::size_t n = w.size();
  double c = 0.0;
  for (std::size_t i = 0; i < n; ++i) c = std::max(c, std::abs(w[(i + 1) % n] - w[i]) * static_cast<double>(n));
  return c;
}

inline std::vector<double> centered_gradient(std::span<const double> u) {
  const std::size_t n = u.size();
  std::vector<double> du(n);
  const double inv_2h = 0.5 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) du[i] = (u[(i + 1) % n] - u[(i + n - 1) % n]) * inv_2h;
  return du;
}

/// h_t(x_from, x_to), evolving d(x_from, .)^2 / (2 dt) (the free one-step action) for
/// t - dt. Accurate to O(dt + grid spacing).
inline double minimal_action(const HamiltonianModel& model, std::size_t n, std::size_t from, std::size_t to,
                             double t, double dt = 1e-2) {
  require(from < n && to < n, "minimal_action: node out of range");
  require(t >= dt, "minimal_action: t must be at least dt");
  const double x0 = static_cast<double>(from) / static_cast<double>(n);
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = circle_distance(x0, static_cast<double>(i) / static_cast<double>(n));
    phi[i] = d * d / (2.0 * dt);
  }
  const std::size_t steps = detail::step_count(t, dt) - 1;
  const HopfLaxKernel kernel(model, n, dt);
  std::vector<double> next(n);
  for (std::size_t k = 0; k < steps; ++k) {
    kernel.step(phi, next, {}, false);
    phi.swap(next);
  }
  return phi[to];
}

struct CriticalValueOptions {
  double dt = 1e-3;
  double tolerance = 1e-2;  // on the oscillation diagnostic
};

struct CriticalValue {
  double c0 = 0.0;
  double diagnostic = 0.0;  // osc_x [w(T) + c0 T - w(T/2) - c0 T/2]
  double t_probe = 0.0;
};

namespace detail {

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double oscillation(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

}  // namespace detail

/// c0 = -(mean w(T) - mean w(T/2)) / (T/2) for the semigroup started at 0.
inline CriticalValue critical_value(const HamiltonianModel& model, std::size_t n, double t_probe,
                                    const CriticalValueOptions& opts = {}) {
  require(t_probe >= 20.0, "critical_value: T_probe must be at least 20");
  const std::size_t steps = detail::step_count(t_probe, opts.dt);
  require(steps % 2 == 0, "critical_value: T_probe/dt must be even");
  const HopfLaxKernel kernel(model, n, opts.dt);
  std::vector<double> w(n, 0.0), next(n), half;
  for (std::size_t k = 1; k <= steps; ++k) {
    kernel.step(w, next);
    w.swap(next);
    if (k == steps / 2) half = w;
  }
  CriticalValue out;
  out.t_probe = t_probe;
  out.c0 = -(detail::mean(w) - detail::mean(half)) / (0.5 * t_probe);
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = w[i] - half[i];
  out.diagnostic = detail::oscillation(diff);
  if (out.diagnostic > opts.tolerance) {
    throw Error(ErrorCode::not_converged, "critical value diagnostic " + detail::format_double(out.diagnostic) +
                                              " exceeds tolerance " + detail::format_double(opts.tolerance));
  }
  return out;
}

struct WeakKamSolution {
  std::vector<double> u0;         // min 0
  double semiconcavity = 0.0;     // C_sc, measured at t = 1
  double residual = 0.0;          // max |H(x, Du0) - c0| over non-kink nodes
  std::vector<bool> kink;         // nodes excluded from the residual
  double t_probe = 0.0;
};

/// u0 = w(T_probe) + c0 T_probe normalised to min 0, with the stationary residual at
/// nodes whose second difference is not below -C_sc.
inline WeakKamSolution weak_kam_solution(const HamiltonianModel& model, std::size_t n, double c0, double t_probe,
                                         const CriticalValueOptions& opts = {}) {
  require(t_probe >= 1.0, "weak_kam_solution: T_probe must be at least 1");
  const std::size_t steps = detail::step_count(t_probe, opts.dt);
  const std::size_t unit = detail::step_count(1.0, opts.dt);
  const HopfLaxKernel kernel(model, n, opts.dt);
  WeakKamSolution out;
  out.t_probe = t_probe;
  std::vector<double> w(n, 0.0), next(n);
  for (std::size_t k = 1; k <= steps; ++k) {
    kernel.step(w, next);
    w.swap(next);
    if (k == unit) out.semiconcavity = std::max(1.0, semiconcavity_constant(w));
  }
  for (std::size_t i = 0; i < n; ++i) w[i] += c0 * t_probe;
  const double lo = *std::min_element(w.begin(), w.end());
  for (double& v : w) v -= lo;
  out.u0 = std::move(w);

  const double inv_h2 = static_cast<double>(n) * static_cast<double>(n);
  const auto du = centered_gradient(out.u0);
  out.kink.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const double d2 = (out.u0[(i + 1) % n] - 2.0 * out.u0[i] + out.u0[(i + n - 1) % n]) * inv_h2;
    if (d2 < -out.semiconcavity) {
      out.kink[i] = true;
      continue;
    }
    const double x = static_cast<double>(i) / static_cast<double>(n);
    out.residual = std::max(out.residual, std::abs(model.hamiltonian(x, du[i]) - c0));
  }
  return out;
}

/// alpha(a): the critical value of (p + a)^2/2 + V(x).
inline double alpha_function(const HamiltonianModel& model, double a, std::size_t n, double t_probe,
                             const CriticalValueOptions& opts = {}) {
  require(model.family() == HamiltonianModel::Family::mechanical, "alpha_function needs a mechanical model");
  return critical_value(model.with_shift(a), n, t_probe, opts).c0;
}

/// a0 = int_0^1 sqrt(-2 V) dx by composite Simpson; the half-width of the alpha plateau
/// when max V = 0.
inline double plateau_half_width(const Potential& v, std::size_t intervals = 2000) {
  return simpson([&](double x) { return std::sqrt(std::max(0.0, -2.0 * v.value(x))); }, 0.0, 1.0, intervals);
}

}  // namespace mfgtorus
