#pragma once

// Integral couplings F(m) = int f dm with a closed-form periodic integrand.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "mfgtorus/circle.hpp"
#include "mfgtorus/error.hpp"
#include "mfgtorus/hamiltonian.hpp"
#include "mfgtorus/measures.hpp"

namespace mfgtorus {

/// f(x) = a_0 + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x).
class CouplingFunctional {
 public:
  static CouplingFunctional zero() { return CouplingFunctional("zero", 0.0, {}, {}); }
  static CouplingFunctional constant(double k) { return CouplingFunctional("constant(" + detail::format_double(k) + ")", k, {}, {}); }
  /// f = 4 pi cos(2 pi x).
  static CouplingFunctional cosine4pi() { return CouplingFunctional("cosine4pi", 0.0, {2.0 * two_pi}, {0.0}); }

  static CouplingFunctional fourier(double a0, std::vector<double> a, std::vector<double> b) {
    require(a.size() == b.size(), "fourier coupling: coefficient count mismatch");
    std::string id = "custom-fourier(" + detail::format_double(a0);
    for (std::size_t k = 0; k < a.size(); ++k) id += "," + detail::format_double(a[k]) + "," + detail::format_double(b[k]);
    id += ")";
    return CouplingFunctional(std::move(id), a0, std::move(a), std::move(b));
  }

  /// Ids: "zero", "cosine4pi", "constant(k)", "custom-fourier(a0, a1, b1, a2, b2, ...)".
  static CouplingFunctional parse(std::string_view text) {
    const auto id = detail::parse_id(text);
    if (id.name == "zero" && id.args.empty()) return zero();
    if (id.name == "cosine4pi" && id.args.empty()) return cosine4pi();
    if (id.name == "constant" && id.args.size() == 1) return constant(id.args[0]);
    if (id.name == "custom-fourier" && !id.args.empty() && id.args.size() % 2 == 1) {
      std::vector<double> a, b;
      for (std::size_t k = 1; k + 1 < id.args.size(); k += 2) {
        a.push_back(id.args[k]);
        b.push_back(id.args[k + 1]);
      }
      return fourier(id.args[0], std::move(a), std::move(b));
    }
    throw Error(ErrorCode::invalid_input, "unknown coupling '" + std::string(text) + "'");
  }

  const std::string& id() const { return id_; }

  double integrand(double x) const {
    double s = a0_;
    for (std::size_t k = 0; k < a_.size(); ++k) {
      const double arg = two_pi * static_cast<double>(k + 1) * x;
      s += a_[k] * std::cos(arg) + b_[k] * std::sin(arg);
    }
    return s;
  }

  /// C_f = sum_k 2 pi k (|a_k| + |b_k|), an upper bound of Lip(f).
  double lipschitz_constant() const {
    double c = 0.0;
    for (std::size_t k = 0; k < a_.size(); ++k) c += two_pi * static_cast<double>(k + 1) * (std::abs(a_[k]) + std::abs(b_[k]));
    return c;
  }

  double evaluate(const CircleMeasure& m) const {
    return m.integrate([this](double x) { return integrand(x); });
  }

  double operator()(const CircleMeasure& m) const { return evaluate(m); }

 private:
  CouplingFunctional(std::string id, double a0, std::vector<double> a, std::vector<double> b)
      : id_(std::move(id)), a0_(a0), a_(std::move(a)), b_(std::move(b)) {}

  std::string id_;
  double a0_;
  std::vector<double> a_;
  std::vector<double> b_;
};

inline double evaluate(const CouplingFunctional& F, const CircleMeasure& m) { return F.evaluate(m); }

/// int (F(m1) - F(m2)) d(m1 - m2) = (F(m1) - F(m2)) (|m1| - |m2|).
inline double monotonicity_defect(const CouplingFunctional& F, const CircleMeasure& m1, const CircleMeasure& m2) {
  return (F.evaluate(m1) - F.evaluate(m2)) * (m1.total_mass() - m2.total_mass());
}

}  // namespace mfgtorus
