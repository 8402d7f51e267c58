#pragma once

// Drift field v(x) = dH/dp(x, Du0(x)) of a weak KAM solution, the dichotomy
// fixed points / periodic orbit on the circle, the characteristic flow and its
// inverse through G(x) = int dx / v.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "mfgtorus/circle.hpp"
#include "mfgtorus/error.hpp"
#include "mfgtorus/hamiltonian.hpp"
#include "mfgtorus/lax_oleinik.hpp"

namespace mfgtorus {

enum class MatherClass { fixed_points, periodic_orbit };

inline const char* to_string(MatherClass c) {
  return c == MatherClass::periodic_orbit ? "periodic-orbit" : "fixed-points";
}

struct DriftOptions {
  double v_floor = 1e-3;
};

/// Node samples of the drift with a C^2 periodic spline used by the flow.
class DriftField {
 public:
  DriftField(std::vector<double> v, MatherClass cls, std::optional<double> tau)
      : spline_(std::make_shared<const PeriodicSpline>(v)), v_(std::move(v)), class_(cls), tau_(tau) {}

  std::size_t size() const { return v_.size(); }
  double spacing() const { return 1.0 / static_cast<double>(v_.size()); }
  std::span<const double> nodes() const { return v_; }
  MatherClass classification() const { return class_; }
  bool periodic() const { return class_ == MatherClass::periodic_orbit; }

  double tau() const {
    if (!tau_) throw Error(ErrorCode::not_periodic_regime, "drift field has no periodic orbit");
    return *tau_;
  }

  double velocity(double x) const { return (*spline_)(x); }
  double velocity_derivative(double x) const { return spline_->derivative(x); }

  void require_periodic(const char* who) const {
    if (!periodic()) {
      throw Error(ErrorCode::not_periodic_regime, std::string(who) + ": Mather set consists of fixed points");
    }
  }

  /// Lipschitz constant of x -> v(x): max of the discrete slopes and of |S'| on a 4x finer grid.
  double lipschitz() const {
    const std::size_t n = v_.size();
    double k = 0.0;
    for (std::size_t i = 0; i < n; ++i) k = std::max(k, std::abs(v_[(i + 1) % n] - v_[i]) * static_cast<double>(n));
    for (std::size_t j = 0; j < 4 * n; ++j) {
      k = std::max(k, std::abs(spline_->derivative(static_cast<double>(j) / static_cast<double>(4 * n))));
    }
    return k;
  }

 private:
  std::shared_ptr<const PeriodicSpline> spline_;
  std::vector<double> v_;
  MatherClass class_;
  std::optional<double> tau_;
};

/// v_i = dH/dp(x_i, Du0(x_i)) with centered differences; classification per the
/// sign and size of v; tau = trapezoid of 1/|v| when periodic.
inline DriftField drift_field(std::span<const double> u0, const HamiltonianModel& model,
                              const DriftOptions& opts = {}) {
  const std::size_t n = u0.size();
  require(n >= 8, "drift_field: grid too small");
  const auto du = centered_gradient(u0);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = model.dh_dp(static_cast<double>(i) / static_cast<double>(n), du[i]);

  const bool positive = std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
  const bool negative = std::all_of(v.begin(), v.end(), [](double x) { return x < 0.0; });
  double vmin = std::abs(v[0]);
  for (double x : v) vmin = std::min(vmin, std::abs(x));

  if (!(positive || negative) || vmin < opts.v_floor) {
    if ((positive || negative) && vmin > 0.5 * opts.v_floor) {
      throw Error(ErrorCode::ambiguous_classification,
                  "min |v| = " + detail::format_double(vmin) + " lies in the ambiguous band below v_floor");
    }
    return DriftField(std::move(v), MatherClass::fixed_points, std::nullopt);
  }
  double tau = 0.0;
  for (double x : v) tau += 1.0 / std::abs(x);
  tau /= static_cast<double>(n);
  return DriftField(std::move(v), MatherClass::periodic_orbit, tau);
}

namespace detail {

inline double rk4_drift(const DriftField& df, double x, double span, double max_step) {
  if (span == 0.0) return x;
  const auto steps = static_cast<std::size_t>(std::ceil(std::abs(span) / max_step - 1e-12));
  const double h = span / static_cast<double>(std::max<std::size_t>(steps, 1));
  for (std::size_t s = 0; s < std::max<std::size_t>(steps, 1); ++s) {
    const double k1 = df.velocity(x);
    const double k2 = df.velocity(x + 0.5 * h * k1);
    const double k3 = df.velocity(x + 0.5 * h * k2);
    const double k4 = df.velocity(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

}  // namespace detail

/// Phi(t, T, x): position at time t of the characteristic through x at time T,
/// by fixed-step RK4 from T to t (backward when t < T).
inline double forward_flow(const DriftField& df, double t, double T, double x, double step = 1e-3) {
  df.require_periodic("forward_flow");
  require(step > 0.0, "forward_flow: step must be positive");
  if (t == T) return x;
  return wrap(detail::rk4_drift(df, x, t - T, step));
}

/// G-table of a periodic drift: G(x_i) = int_0^{x_i} dx / v(x), cell integrals by
/// 5-point Gauss-Legendre on the spline, plus the winding G(1) - G(0) = +-tau.
class FlowMap {
 public:
  FlowMap(DriftField df, double reference_time = 0.0, double tolerance = 1e-10)
      : df_(std::move(df)), reference_time_(reference_time), tolerance_(tolerance) {
    df_.require_periodic("FlowMap");
    const std::size_t n = df_.size();
    const double h = df_.spacing();
    g_.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = static_cast<double>(i) * h;
      g_[i + 1] = g_[i] + gauss_legendre5([&](double x) { return 1.0 / df_.velocity(x); }, a, a + h);
    }
  }

  const DriftField& drift() const { return df_; }
  double reference_time() const { return reference_time_; }
  double winding() const { return g_.back(); }
  std::span<const double> table() const { return g_; }

  /// G on the lift: G(x + k) = G(x) + k * winding.
  double G(double x) const {
    const double fl = std::floor(x);
    const double r = x - fl;
    const std::size_t n = df_.size();
    auto i = static_cast<std::size_t>(r * static_cast<double>(n));
    if (i >= n) i = n - 1;
    const double a = static_cast<double>(i) * df_.spacing();
    return fl * winding() + g_[i] + gauss_legendre5([&](double s) { return 1.0 / df_.velocity(s); }, a, r);
  }

  /// Phi^{-1}(t, T, y): the x with G(x) = G(y) + (T - t), reduced mod 1.
  double inverse(double t, double T, double y) const {
    if (t == T) return y;
    const double target = G(y) + (T - t);
    const double w = winding();
    const double laps = std::floor(target / w);
    double r = target - laps * w;  // between 0 and w
    const bool increasing = w > 0.0;
    const std::size_t n = df_.size();
    // Cell containing r: g_ is monotone.
    std::size_t lo = 0, hi = n;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if ((g_[mid] <= r) == increasing) lo = mid; else hi = mid;
    }
    double a = static_cast<double>(lo) * df_.spacing();
    double b = a + df_.spacing();
    double x = 0.5 * (a + b);
    // Safeguarded Newton on the monotone G, then one polishing step.
    bool polished = false;
    for (int it = 0; it < 100; ++it) {
      const double res = G(x) - r;
      if (std::abs(res) <= tolerance_) {
        if (polished) break;
        polished = true;
      }
      if ((res > 0.0) == increasing) b = x; else a = x;
      double next = x - res * df_.velocity(x);
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (next == x) break;
      x = next;
    }
    return wrap(laps + x);
  }

  void write_csv(std::ostream& os) const {
    os << "x,G,v\n";
    const std::size_t n = df_.size();
    for (std::size_t i = 0; i <= n; ++i) {
      const double x = static_cast<double>(i) * df_.spacing();
      os << detail::format_double(x) << ',' << detail::format_double(g_[i]) << ','
         << detail::format_double(df_.nodes()[i % n]) << '\n';
    }
  }

 private:
  DriftField df_;
  double reference_time_;
  double tolerance_;
  std::vector<double> g_;
};

inline double inverse_flow(const FlowMap& fm, double t, double T, double y) { return fm.inverse(t, T, y); }

struct FlowLipschitz {
  double k1 = 0.0;              // max d(Phi x, Phi y) / d(x, y)
  double k2 = 0.0;              // Lipschitz constant of v
  double gronwall_bound = 0.0;  // exp(window * k2)
};

/// Samples Phi(t, T, .) at `points` positions and `times` + 1 instants in [T - window, T]
/// (the drift is autonomous, so only T - t matters). Pairs closer than the grid spacing
/// are skipped.
inline FlowLipschitz flow_lipschitz_constant(const DriftField& df, double window, std::size_t points = 64,
                                             std::size_t times = 16, double step = 1e-3) {
  df.require_periodic("flow_lipschitz_constant");
  require(window > 0.0 && points >= 2 && times >= 1, "flow_lipschitz_constant: bad sampling");
  std::vector<double> x0(points), x(points);
  for (std::size_t j = 0; j < points; ++j) x0[j] = x[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(points);
  const double h = df.spacing();
  FlowLipschitz out;
  const double dt_sample = window / static_cast<double>(times);
  for (std::size_t k = 0; k <= times; ++k) {
    if (k > 0) {
      for (double& xi : x) xi = detail::rk4_drift(df, xi, -dt_sample, step);
    }
    for (std::size_t i = 0; i < points; ++i) {
      for (std::size_t j = i + 1; j < points; ++j) {
        const double d0 = circle_distance(x0[i], x0[j]);
        if (d0 < h) continue;
        out.k1 = std::max(out.k1, circle_distance(x[i], x[j]) / d0);
      }
    }
  }
  out.k2 = df.lipschitz();
  out.gronwall_bound = std::exp(window * out.k2);
  return out;
}

}  // namespace mfgtorus
