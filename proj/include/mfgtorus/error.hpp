#pragma once

#include <stdexcept>
#include <string>

namespace mfgtorus {

enum class ErrorCode {
  invalid_input,
  cutoff_too_small,
  velocity_cutoff_exceeded,
  not_converged,
  ambiguous_classification,
  mass_drift_exceeded,
  not_periodic_regime,
  degenerate_backtrack,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::cutoff_too_small: return "cutoff-too-small";
    case ErrorCode::velocity_cutoff_exceeded: return "velocity-cutoff-exceeded";
    case ErrorCode::not_converged: return "not-converged";
    case ErrorCode::ambiguous_classification: return "ambiguous-classification";
    case ErrorCode::mass_drift_exceeded: return "mass-drift-exceeded";
    case ErrorCode::not_periodic_regime: return "not-periodic-regime";
    case ErrorCode::degenerate_backtrack: return "degenerate-backtrack";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can tell bad input from numerical trouble.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw Error(ErrorCode::invalid_input, what);
}

}  // namespace mfgtorus
