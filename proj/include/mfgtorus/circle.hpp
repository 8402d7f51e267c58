#pragma once

// Geometry and interpolation on the unit circle T = R/Z.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "mfgtorus/error.hpp"

namespace mfgtorus {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Reduces x to [0, 1).
inline double wrap(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r = 0.0;  // x = -tiny rounds up to 1.0
  return r;
}

/// Signed displacement from `from` to `to` along the shorter arc, in [-1/2, 1/2).
inline double signed_displacement(double from, double to) {
  return wrap(to - from + 0.5) - 0.5;
}

inline double circle_distance(double a, double b) {
  return std::abs(signed_displacement(a, b));
}

inline std::size_t wrap_index(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  std::ptrdiff_t r = i % m;
  return static_cast<std::size_t>(r < 0 ? r + m : r);
}

/// Uniform grid x_i = i/N on the circle.
struct CircleGrid {
  std::size_t n = 0;

  double spacing() const { return 1.0 / static_cast<double>(n); }
  double node(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(n); }
};

/// Piecewise-linear periodic interpolation of node samples y_i = f(i/N).
inline double periodic_linear(std::span<const double> y, double x) {
  const std::size_t n = y.size();
  const double s = wrap(x) * static_cast<double>(n);
  const auto i = static_cast<std::size_t>(s);
  const double frac = s - static_cast<double>(i);
  const std::size_t i0 = i % n;
  const std::size_t i1 = (i0 + 1) % n;
  return (1.0 - frac) * y[i0] + frac * y[i1];
}

/// Interpolating periodic cubic spline through uniform nodes (C^2).
class PeriodicSpline {
 public:
  PeriodicSpline() = default;

  explicit PeriodicSpline(std::vector<double> values) : y_(std::move(values)) {
    require(y_.size() >= 3, "periodic spline needs at least 3 nodes");
    const std::size_t n = y_.size();
    h_ = 1.0 / static_cast<double>(n);
    // M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i+1} - 2 y_i + y_{i-1}) / h^2, cyclic.
    std::vector<double> rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
      rhs[i] = 6.0 * (y_[(i + 1) % n] - 2.0 * y_[i] + y_[(i + n - 1) % n]) / (h_ * h_);
    }
    m_ = solve_cyclic(rhs);
  }

  std::size_t size() const { return y_.size(); }
  std::span<const double> values() const { return y_; }

  double operator()(double x) const {
    auto [i, a, b] = locate(x);
    const std::size_t j = (i + 1) % y_.size();
    return a * y_[i] + b * y_[j] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[j]) * h_ * h_ / 6.0;
  }

  double derivative(double x) const {
    auto [i, a, b] = locate(x);
    const std::size_t j = (i + 1) % y_.size();
    return (y_[j] - y_[i]) / h_ + ((1.0 - 3.0 * a * a) * m_[i] + (3.0 * b * b - 1.0) * m_[j]) * h_ / 6.0;
  }

  double second_derivative(double x) const {
    auto [i, a, b] = locate(x);
    const std::size_t j = (i + 1) % y_.size();
    return a * m_[i] + b * m_[j];
  }

 private:
  struct Cell {
    std::size_t i;
    double a;  // weight of the left node
    double b;  // weight of the right node
  };

  Cell locate(double x) const {
    const std::size_t n = y_.size();
    const double s = wrap(x) * static_cast<double>(n);
    auto i = static_cast<std::size_t>(s);
    if (i >= n) i = n - 1;
    const double b = s - static_cast<double>(i);
    return {i, 1.0 - b, b};
  }

  // Solves the constant-coefficient cyclic system (1, 4, 1) by Sherman-Morrison.
  static std::vector<double> solve_cyclic(const std::vector<double>& rhs) {
    const std::size_t n = rhs.size();
    const double gamma = -4.0;
    std::vector<double> diag(n, 4.0);
    diag[0] = 4.0 - gamma;
    diag[n - 1] = 4.0 - 1.0 / gamma;
    auto thomas = [&](std::vector<double> d) {
      std::vector<double> c(n), bb = diag;
      c[0] = 1.0 / bb[0];
      d[0] /= bb[0];
      for (std::size_t i = 1; i < n; ++i) {
        const double denom = bb[i] - c[i - 1];
        c[i] = 1.0 / denom;
        d[i] = (d[i] - d[i - 1]) / denom;
      }
      for (std::size_t i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
      return d;
    };
    std::vector<double> x = thomas(rhs);
    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = 1.0;
    std::vector<double> z = thomas(u);
    const double fact = (x[0] + x[n - 1] / gamma) / (1.0 + z[0] + z[n - 1] / gamma);
    for (std::size_t i = 0; i < n; ++i) x[i] -= fact * z[i];
    return x;
  }

  std::vector<double> y_;
  std::vector<double> m_;
  double h_ = 0.0;
};

/// Five-point Gauss-Legendre rule on [a, b].
template <class F>
double gauss_legendre5(F&& f, double a, double b) {
  static constexpr std::array<double, 5> nodes{0.0, -0.5384693101056831, 0.5384693101056831,
                                               -0.9061798459386640, 0.9061798459386640};
  static constexpr std::array<double, 5> weights{0.5688888888888889, 0.4786286704993665,
                                                 0.4786286704993665, 0.2369268850561891,
                                                 0.2369268850561891};
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t k = 0; k < 5; ++k) sum += weights[k] * f(mid + half * nodes[k]);
  return half * sum;
}

/// Composite Simpson rule with `intervals` (rounded up to even) subintervals.
template <class F>
double simpson(F&& f, double a, double b, std::size_t intervals) {
  if (intervals % 2 == 1) ++intervals;
  const double h = (b - a) / static_cast<double>(intervals);
  double sum = f(a) + f(b);
  for (std::size_t i = 1; i < intervals; ++i) {
    sum += (i % 2 == 1 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  }
  return sum * h / 3.0;
}

/// Trapezoid rule on a (possibly non-uniform) sample grid.
inline double trapezoid(std::span<const double> t, std::span<const double> f) {
  double sum = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) sum += 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
  return sum;
}

/// Cumulative trapezoid integral, out[0] = 0.
inline std::vector<double> cumulative_trapezoid(std::span<const double> t, std::span<const double> f) {
  std::vector<double> out(t.size(), 0.0);
  for (std::size_t k = 1; k < t.size(); ++k) {
    out[k] = out[k - 1] + 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
  }
  return out;
}

}  // namespace mfgtorus
