#pragma once

// Tonelli Hamiltonians on the circle (and the diagonal T^n drift family),
// their Legendre duals, and the Hamiltonian flow.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfgtorus/circle.hpp"
#include "mfgtorus/error.hpp"

namespace mfgtorus {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Splits "name(a, b, c)" into name and numeric arguments. Plain "name" has no arguments.
struct ParsedId {
  std::string name;
  std::vector<double> args;
};

inline ParsedId parse_id(std::string_view text) {
  ParsedId out;
  const std::string s = trim(text);
  const auto open = s.find('(');
  if (open == std::string::npos) {
    out.name = s;
    return out;
  }
  require(!s.empty() && s.back() == ')', "malformed id '" + s + "': missing ')'");
  out.name = trim(std::string_view(s).substr(0, open));
  std::string inner = s.substr(open + 1, s.size() - open - 2);
  std::size_t pos = 0;
  while (pos <= inner.size()) {
    auto comma = inner.find(',', pos);
    if (comma == std::string::npos) comma = inner.size();
    const std::string tok = trim(std::string_view(inner).substr(pos, comma - pos));
    if (!tok.empty()) {
      try {
        std::size_t used = 0;
        out.args.push_back(std::stod(tok, &used));
        require(used == tok.size(), "malformed number '" + tok + "' in '" + s + "'");
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::invalid_input, "malformed number '" + tok + "' in '" + s + "'");
      }
    }
    pos = comma + 1;
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Potential V on the circle: closed form or uniform samples.
class Potential {
 public:
  enum class Kind { zero, cosine, double_well, sampled };

  static Potential zero() { return Potential(Kind::zero); }
  static Potential cosine() { return Potential(Kind::cosine); }

  /// V(x) = -amp sin^2(pi x) sin^2(pi (x - X)); maxima V = 0 at 0 and X.
  static Potential double_well(double well_x, double amp) {
    require(well_x > 0.0 && well_x < 1.0, "double-well: X must lie in (0, 1)");
    require(amp > 0.0, "double-well: amp must be positive");
    Potential p(Kind::double_well);
    p.well_x_ = well_x;
    p.amp_ = amp;
    return p;
  }

  /// Samples at x_i = i/N for i = 0..N (both endpoints); interpolated by a periodic spline.
  static Potential sampled(std::vector<double> samples_with_endpoint) {
    require(samples_with_endpoint.size() >= 4, "sampled potential needs at least 4 samples");
    require(std::abs(samples_with_endpoint.front() - samples_with_endpoint.back()) <= 1e-12,
            "sampled potential is not periodic: V(0) != V(1)");
    samples_with_endpoint.pop_back();
    Potential p(Kind::sampled);
    p.spline_ = std::make_shared<PeriodicSpline>(std::move(samples_with_endpoint));
    return p;
  }

  /// Accepts "zero", "cosine", "double-well(X, amp)".
  static Potential parse(std::string_view text) {
    const auto id = detail::parse_id(text);
    if (id.name == "zero" && id.args.empty()) return zero();
    if (id.name == "cosine" && id.args.empty()) return cosine();
    if (id.name == "double-well") {
      require(id.args.size() == 2, "double-well expects (X, amp)");
      return double_well(id.args[0], id.args[1]);
    }
    throw Error(ErrorCode::invalid_input, "unknown potential '" + std::string(text) + "'");
  }

  Kind kind() const { return kind_; }

  double value(double x) const {
    switch (kind_) {
      case Kind::zero: return 0.0;
      case Kind::cosine: return std::cos(two_pi * x);
      case Kind::double_well: {
        const double s1 = std::sin(std::numbers::pi * x);
        const double s2 = std::sin(std::numbers::pi * (x - well_x_));
        return -amp_ * s1 * s1 * s2 * s2;
      }
      case Kind::sampled: return (*spline_)(x);
    }
    return 0.0;
  }

  double derivative(double x) const {
    constexpr double pi = std::numbers::pi;
    switch (kind_) {
      case Kind::zero: return 0.0;
      case Kind::cosine: return -two_pi * std::sin(two_pi * x);
      case Kind::double_well: {
        // d/dx sin^2(pi x) = pi sin(2 pi x)
        const double s1 = std::sin(pi * x);
        const double s2 = std::sin(pi * (x - well_x_));
        return -amp_ * pi * (std::sin(two_pi * x) * s2 * s2 + s1 * s1 * std::sin(two_pi * (x - well_x_)));
      }
      case Kind::sampled: return spline_->derivative(x);
    }
    return 0.0;
  }

  double max_value() const {
    switch (kind_) {
      case Kind::zero: return 0.0;
      case Kind::cosine: return 1.0;
      case Kind::double_well: return 0.0;
      case Kind::sampled: {
        const auto v = spline_->values();
        return *std::max_element(v.begin(), v.end());
      }
    }
    return 0.0;
  }

  std::string id() const {
    switch (kind_) {
      case Kind::zero: return "zero";
      case Kind::cosine: return "cosine";
      case Kind::double_well:
        return "double-well(" + detail::format_double(well_x_) + ", " + detail::format_double(amp_) + ")";
      case Kind::sampled: return "sampled(" + std::to_string(spline_->size()) + ")";
    }
    return "?";
  }

 private:
  explicit Potential(Kind k) : kind_(k) {}

  Kind kind_ = Kind::zero;
  double well_x_ = 0.5;
  double amp_ = 1.0;
  std::shared_ptr<const PeriodicSpline> spline_;
};

/// Samples of H on T x [-P, P]: values[i * np + j] = H(i/nx, -P + j * 2P/(np-1)).
struct HamiltonianTable {
  std::size_t nx = 0;
  std::size_t np = 0;
  double p_max = 10.0;
  std::vector<double> values;

  double dp() const { return 2.0 * p_max / static_cast<double>(np - 1); }
  double p_node(std::size_t j) const { return -p_max + static_cast<double>(j) * dp(); }
  double at(std::size_t i, std::size_t j) const { return values[i * np + j]; }
};

struct Cutoffs {
  double momentum = 10.0;  // P
  double velocity = 10.0;  // Vmax
  double min_slope = 1.0;  // H(x, +-P)/P must exceed this
};

class HamiltonianModel {
 public:
  enum class Family { mechanical, quadratic_drift, tabulated };

  /// H(x,p) = (p + a)^2 / 2 + V(x).
  static HamiltonianModel mechanical(double shift, Potential potential, Cutoffs cutoffs = {}) {
    HamiltonianModel m(Family::mechanical, cutoffs);
    m.shift_ = shift;
    m.potential_ = std::move(potential);
    return m;
  }

  /// H(x,p) = sum_i (p_i^2 / 2 - p_i) on T^n.
  static HamiltonianModel quadratic_drift(int dimension = 1, Cutoffs cutoffs = {}) {
    require(dimension >= 1, "quadratic-drift: dimension must be >= 1");
    HamiltonianModel m(Family::quadratic_drift, cutoffs);
    m.dimension_ = dimension;
    return m;
  }

  static HamiltonianModel tabulated(HamiltonianTable table, Cutoffs cutoffs = {}) {
    require(table.nx >= 4 && table.np >= 5, "tabulated: table too small");
    require(table.values.size() == table.nx * table.np, "tabulated: value count mismatch");
    require(table.p_max > 0.0, "tabulated: momentum cutoff must be positive");
    cutoffs.momentum = table.p_max;
    HamiltonianModel m(Family::tabulated, cutoffs);
    m.table_ = std::make_shared<const HamiltonianTable>(std::move(table));
    return m;
  }

  /// Samples a one-dimensional model onto a table with nx x-nodes and np p-nodes.
  static HamiltonianModel tabulate(const HamiltonianModel& source, std::size_t nx, std::size_t np) {
    require(source.dimension() == 1, "tabulate: model must be one-dimensional");
    HamiltonianTable t;
    t.nx = nx;
    t.np = np;
    t.p_max = source.cutoffs().momentum;
    t.values.resize(nx * np);
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < np; ++j) {
        t.values[i * np + j] = source.hamiltonian(static_cast<double>(i) / static_cast<double>(nx), t.p_node(j));
      }
    }
    return tabulated(std::move(t), source.cutoffs());
  }

  Family family() const { return family_; }
  int dimension() const { return dimension_; }
  double shift() const { return shift_; }
  const Potential& potential() const { return potential_; }
  const Cutoffs& cutoffs() const { return cutoffs_; }
  const HamiltonianTable* table() const { return table_.get(); }

  HamiltonianModel with_shift(double a) const {
    require(family_ == Family::mechanical, "with_shift: only mechanical models carry a momentum shift");
    HamiltonianModel m = *this;
    m.shift_ = a;
    return m;
  }

  double hamiltonian(double x, double p) const {
    switch (family_) {
      case Family::mechanical: return 0.5 * (p + shift_) * (p + shift_) + potential_.value(x);
      case Family::quadratic_drift: return 0.5 * p * p - p;
      case Family::tabulated: return table_value(x, p);
    }
    return 0.0;
  }

  double dh_dp(double x, double p) const {
    switch (family_) {
      case Family::mechanical: return p + shift_;
      case Family::quadratic_drift: return p - 1.0;
      case Family::tabulated: {
        const double dp = table_->dp();
        const double lo = std::max(p - dp, -table_->p_max);
        const double hi = std::min(p + dp, table_->p_max);
        return (table_value(x, hi) - table_value(x, lo)) / (hi - lo);
      }
    }
    return 0.0;
  }

  double dh_dx(double x, double p) const {
    switch (family_) {
      case Family::mechanical: return potential_.derivative(x);
      case Family::quadratic_drift: return 0.0;
      case Family::tabulated: {
        const double dx = 1.0 / static_cast<double>(table_->nx);
        return (table_value(x + dx, p) - table_value(x - dx, p)) / (2.0 * dx);
      }
    }
    return 0.0;
  }

  double hamiltonian(std::span<const double> x, std::span<const double> p) const {
    check_dimension(x.size(), p.size());
    if (family_ != Family::quadratic_drift) return hamiltonian(x[0], p[0]);
    double sum = 0.0;
    for (double pi : p) sum += 0.5 * pi * pi - pi;
    return sum;
  }

  /// Discrete Tonelli checks: positive second p-difference, superlinear slope at the cutoff,
  /// periodic sampled potential (enforced at construction).
  void validate(std::size_t x_samples = 64) const {
    const double P = cutoffs_.momentum;
    require(P > 0.0 && cutoffs_.velocity > 0.0, "cutoffs must be positive");
    if (family_ == Family::tabulated) {
      const auto& t = *table_;
      for (std::size_t i = 0; i < t.nx; ++i) {
        for (std::size_t j = 1; j + 1 < t.np; ++j) {
          const double d2 = t.at(i, j + 1) - 2.0 * t.at(i, j) + t.at(i, j - 1);
          if (!(d2 > 0.0)) {
            throw Error(ErrorCode::invalid_input, "tabulated H is not strictly convex in p at node (" +
                                                      std::to_string(i) + ", " + std::to_string(j) + ")");
          }
        }
      }
    } else {
      const double dp = P / 64.0;
      for (std::size_t i = 0; i < x_samples; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(x_samples);
        for (int j = -63; j <= 63; ++j) {
          const double p = j * dp;
          const double d2 = hamiltonian(x, p + dp) - 2.0 * hamiltonian(x, p) + hamiltonian(x, p - dp);
          require(d2 > 0.0, "H is not strictly convex in p");
        }
      }
    }
    const std::size_t nx = family_ == Family::tabulated ? table_->nx : x_samples;
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(nx);
      if (hamiltonian(x, P) / P <= cutoffs_.min_slope || hamiltonian(x, -P) / P <= cutoffs_.min_slope) {
        throw Error(ErrorCode::invalid_input, "H is not superlinear enough at the momentum cutoff");
      }
    }
  }

  std::string id() const {
    switch (family_) {
      case Family::mechanical:
        return "mechanical(a=" + detail::format_double(shift_) + ", V=" + potential_.id() + ")";
      case Family::quadratic_drift: return "quadratic-drift(n=" + std::to_string(dimension_) + ")";
      case Family::tabulated:
        return "tabulated(" + std::to_string(table_->nx) + "x" + std::to_string(table_->np) + ")";
    }
    return "?";
  }

 private:
  HamiltonianModel(Family f, Cutoffs c) : family_(f), cutoffs_(c) {}

  void check_dimension(std::size_t nx, std::size_t np) const {
    require(nx == static_cast<std::size_t>(dimension_) && np == nx, "phase point dimension mismatch");
  }

  // Bilinear, periodic in x; p is clamped to the table.
  double table_value(double x, double p) const {
    const auto& t = *table_;
    const double sx = wrap(x) * static_cast<double>(t.nx);
    auto i0 = static_cast<std::size_t>(sx);
    if (i0 >= t.nx) i0 = t.nx - 1;
    const double fx = sx - static_cast<double>(i0);
    const std::size_t i1 = (i0 + 1) % t.nx;
    const double sp = (std::clamp(p, -t.p_max, t.p_max) + t.p_max) / t.dp();
    auto j0 = static_cast<std::size_t>(sp);
    if (j0 >= t.np - 1) j0 = t.np - 2;
    const double fp = sp - static_cast<double>(j0);
    const double lo = (1.0 - fp) * t.at(i0, j0) + fp * t.at(i0, j0 + 1);
    const double hi = (1.0 - fp) * t.at(i1, j0) + fp * t.at(i1, j0 + 1);
    return (1.0 - fx) * lo + fx * hi;
  }

  Family family_;
  Cutoffs cutoffs_;
  int dimension_ = 1;
  double shift_ = 0.0;
  Potential potential_ = Potential::zero();
  std::shared_ptr<const HamiltonianTable> table_;
};

struct LagrangianValue {
  double value;
  double argmax_p;
};

/// L(x,v) = sup_p (v p - H(x,p)) together with the maximizing momentum.
inline LagrangianValue lagrangian(const HamiltonianModel& model, double x, double v) {
  const double vmax = model.cutoffs().velocity;
  if (!(std::abs(v) <= vmax)) {
    throw Error(ErrorCode::invalid_input, "velocity " + detail::format_double(v) + " exceeds cutoff");
  }
  switch (model.family()) {
    case HamiltonianModel::Family::mechanical: {
      const double a = model.shift();
      return {0.5 * v * v - a * v - model.potential().value(x), v - a};
    }
    case HamiltonianModel::Family::quadratic_drift:
      return {0.5 * (v + 1.0) * (v + 1.0), v + 1.0};
    case HamiltonianModel::Family::tabulated: {
      // p -> v p - H(x,p) is concave; golden-section search on [-P, P].
      const double P = model.cutoffs().momentum;
      const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
      auto g = [&](double p) { return v * p - model.hamiltonian(x, p); };
      double lo = -P, hi = P;
      double c = hi - inv_phi * (hi - lo);
      double d = lo + inv_phi * (hi - lo);
      double gc = g(c), gd = g(d);
      while (hi - lo > 1e-11 * P) {
        if (gc > gd) {
          hi = d;
          d = c;
          gd = gc;
          c = hi - inv_phi * (hi - lo);
          gc = g(c);
        } else {
          lo = c;
          c = d;
          gc = gd;
          d = lo + inv_phi * (hi - lo);
          gd = g(d);
        }
      }
      const double p = 0.5 * (lo + hi);
      if (P - std::abs(p) < 1e-6 * P) {
        throw Error(ErrorCode::cutoff_too_small, "Legendre maximizer hits the momentum cutoff at v = " +
                                                     detail::format_double(v));
      }
      return {g(p), p};
    }
  }
  return {0.0, 0.0};
}

/// Sum of per-coordinate Lagrangians for the diagonal drift family; 1D otherwise.
inline double lagrangian(const HamiltonianModel& model, std::span<const double> x, std::span<const double> v) {
  require(x.size() == v.size() && x.size() == static_cast<std::size_t>(model.dimension()),
          "lagrangian: dimension mismatch");
  if (model.family() != HamiltonianModel::Family::quadratic_drift) return lagrangian(model, x[0], v[0]).value;
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) sum += lagrangian(model, x[i], v[i]).value;
  return sum;
}

struct PhasePoint {
  std::vector<double> x;  // each coordinate in [0, 1)
  std::vector<double> p;
};

/// Fixed-step RK4 for xdot = dH/dp, pdot = -dH/dx; positions wrapped after every step.
/// Returns samples at t0, t0 + dt, ..., with the last step shortened to land on t1.
inline std::vector<PhasePoint> hamilton_flow(const HamiltonianModel& model, PhasePoint start, double t0,
                                             double t1, double dt) {
  require(dt > 0.0, "hamilton_flow: dt must be positive");
  require(t1 >= t0, "hamilton_flow: t1 < t0");
  const std::size_t n = static_cast<std::size_t>(model.dimension());
  require(start.x.size() == n && start.p.size() == n, "hamilton_flow: phase point dimension mismatch");

  // Coordinates decouple in every family (1D or diagonal drift).
  auto rhs = [&](double x, double p, double& dx, double& dp) {
    dx = model.dh_dp(x, p);
    dp = -model.dh_dx(x, p);
  };

  for (auto& xi : start.x) xi = wrap(xi);
  std::vector<PhasePoint> out{start};
  const auto steps = static_cast<std::size_t>(std::ceil((t1 - t0) / dt - 1e-9));
  PhasePoint cur = start;
  for (std::size_t s = 0; s < steps; ++s) {
    const double h = std::min(dt, t1 - (t0 + static_cast<double>(s) * dt));
    for (std::size_t i = 0; i < n; ++i) {
      const double x = cur.x[i], p = cur.p[i];
      double k1x, k1p, k2x, k2p, k3x, k3p, k4x, k4p;
      rhs(x, p, k1x, k1p);
      rhs(x + 0.5 * h * k1x, p + 0.5 * h * k1p, k2x, k2p);
      rhs(x + 0.5 * h * k2x, p + 0.5 * h * k2p, k3x, k3p);
      rhs(x + h * k3x, p + h * k3p, k4x, k4p);
      cur.x[i] = wrap(x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x));
      cur.p[i] = p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    }
    out.push_back(cur);
  }
  return out;
}

}  // namespace mfgtorus
