#pragma once

// Residuals of the explicit periodic pair on T^n for
//   d_t u + sum_i (u_i^2 / 2 - u_i) = F(m(t)),   d_t m + sum_i d_i((u_i - 1) m) = 0,
// F(m) = int 4 pi cos(2 pi sum x_i) m dx, evaluated from closed-form derivatives or
// from centered differences of grid samples.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mfgtorus/circle.hpp"
#include "mfgtorus/error.hpp"

namespace mfgtorus {

enum class ExampleCandidate {
  periodic,    // u = sin(2 pi t), m = 1 + cos(2 pi (sum x + t))
  stationary,  // u = 0, m = 1
  rescaled,    // u = sin(2 pi n t) / n, m = 1 + cos(2 pi (sum x + n t))
};

inline ExampleCandidate parse_candidate(std::string_view s) {
  if (s == "periodic") return ExampleCandidate::periodic;
  if (s == "stationary") return ExampleCandidate::stationary;
  if (s == "rescaled") return ExampleCandidate::rescaled;
  throw Error(ErrorCode::invalid_input, "unknown example candidate '" + std::string(s) + "'");
}

inline const char* to_string(ExampleCandidate c) {
  switch (c) {
    case ExampleCandidate::periodic: return "periodic";
    case ExampleCandidate::stationary: return "stationary";
    case ExampleCandidate::rescaled: return "rescaled";
  }
  return "?";
}

enum class ResidualMode { closed_form, finite_difference };

struct ExampleInstance {
  int n = 1;
  std::size_t grid = 256;       // nodes per axis
  std::size_t time_steps = 256; // samples of [0, 1), periodic
  ExampleCandidate candidate = ExampleCandidate::periodic;

  void validate() const {
    require(n >= 1, "example: dimension must be >= 1");
    require(grid >= 4 && time_steps >= 4, "example: grid too small");
    double points = 1.0;
    for (int i = 0; i < n; ++i) points *= static_cast<double>(grid);
    require(points <= 1.0e8, "example: tensor grid too large");
  }
};

namespace detail {

// Candidates depend on x only through s = sum x_i.
struct ExampleFields {
  double u, u_t, u_s, u_ss;
  double m, m_t, m_s;
};

inline ExampleFields example_fields(const ExampleInstance& e, double s, double t) {
  const double nt = e.candidate == ExampleCandidate::rescaled ? static_cast<double>(e.n) : 1.0;
  switch (e.candidate) {
    case ExampleCandidate::stationary: return {0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0};
    case ExampleCandidate::periodic:
    case ExampleCandidate::rescaled: {
      const double arg = two_pi * (s + nt * t);
      return {std::sin(two_pi * nt * t) / nt,
              two_pi * std::cos(two_pi * nt * t),
              0.0,
              0.0,
              1.0 + std::cos(arg),
              -two_pi * nt * std::sin(arg),
              -two_pi * std::sin(arg)};
    }
  }
  return {};
}

// Calls f(s, index) for every node of the tensor grid, s = sum of coordinates.
template <class F>
void for_each_node(const ExampleInstance& e, F&& f) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(e.n), 0);
  const double h = 1.0 / static_cast<double>(e.grid);
  while (true) {
    double s = 0.0;
    for (auto i : idx) s += static_cast<double>(i) * h;
    f(s, idx);
    std::size_t axis = 0;
    while (axis < idx.size() && ++idx[axis] == e.grid) idx[axis++] = 0;
    if (axis == idx.size()) break;
  }
}

}  // namespace detail

/// F(m(t)) by the tensor-product rectangle rule on the instance grid.
inline double example_coupling(const ExampleInstance& e, double t) {
  double sum = 0.0, count = 0.0;
  detail::for_each_node(e, [&](double s, const std::vector<std::size_t>&) {
    sum += 2.0 * two_pi * std::cos(two_pi * s) * detail::example_fields(e, s, t).m;
    count += 1.0;
  });
  return sum / count;
}

/// max over grid and time samples of |d_t u + sum_i (u_i^2/2 - u_i) - F(m(t))|.
inline double hjb_residual(const ExampleInstance& e, ResidualMode mode = ResidualMode::closed_form) {
  e.validate();
  const double h = 1.0 / static_cast<double>(e.grid);
  const double k = 1.0 / static_cast<double>(e.time_steps);
  const double dim = static_cast<double>(e.n);
  double worst = 0.0;
  for (std::size_t j = 0; j < e.time_steps; ++j) {
    const double t = static_cast<double>(j) * k;
    const double f = example_coupling(e, t);
    detail::for_each_node(e, [&](double s, const std::vector<std::size_t>&) {
      double u_t, u_s;
      if (mode == ResidualMode::closed_form) {
        const auto c = detail::example_fields(e, s, t);
        u_t = c.u_t;
        u_s = c.u_s;
      } else {
        auto u = [&](double ss, double tt) { return detail::example_fields(e, ss, tt).u; };
        u_t = (u(s, t + k) - u(s, t - k)) / (2.0 * k);
        u_s = (u(s + h, t) - u(s - h, t)) / (2.0 * h);
      }
      worst = std::max(worst, std::abs(u_t + dim * (0.5 * u_s * u_s - u_s) - f));
    });
  }
  return worst;
}

/// max over grid and time samples of |d_t m + sum_i d_i((u_i - 1) m)|.
inline double continuity_residual_example(const ExampleInstance& e, ResidualMode mode = ResidualMode::closed_form) {
  e.validate();
  const double h = 1.0 / static_cast<double>(e.grid);
  const double k = 1.0 / static_cast<double>(e.time_steps);
  const double dim = static_cast<double>(e.n);
  double worst = 0.0;
  for (std::size_t j = 0; j < e.time_steps; ++j) {
    const double t = static_cast<double>(j) * k;
    detail::for_each_node(e, [&](double s, const std::vector<std::size_t>&) {
      double r;
      if (mode == ResidualMode::closed_form) {
        const auto c = detail::example_fields(e, s, t);
        r = c.m_t + dim * (c.u_ss * c.m + (c.u_s - 1.0) * c.m_s);
      } else {
        auto field = [&](double ss, double tt) { return detail::example_fields(e, ss, tt); };
        // flux (u_i - 1) m at the axis neighbours, u_i by centered differences
        auto flux = [&](double ss) {
          const double ui = (field(ss + h, t).u - field(ss - h, t).u) / (2.0 * h);
          return (ui - 1.0) * field(ss, t).m;
        };
        const double m_t = (field(s, t + k).m - field(s, t - k).m) / (2.0 * k);
        r = m_t + dim * (flux(s + h) - flux(s - h)) / (2.0 * h);
      }
      worst = std::max(worst, std::abs(r));
    });
  }
  return worst;
}

}  // namespace mfgtorus
