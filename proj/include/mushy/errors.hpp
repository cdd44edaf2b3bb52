#pragma once

#include <stdexcept>
#include <string>

namespace mushy {

/// Raised when a config document or a domain type violates its validation
/// rules. Messages name the offending field.
class validation_error : public std::runtime_error {
public:
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a linear or nonlinear solve fails to converge. Carries the
/// last residual so callers can decide whether to retry with gentler settings.
class solver_error : public std::runtime_error {
public:
  solver_error(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual(last_residual) {}
  double last_residual;
};

/// Raised when a runtime invariant of the scheme is violated (e.g. a face
/// coefficient escaping the admissible band). Indicates a bug or an
/// inconsistent problem setup, not a tolerance issue.
class invariant_violation : public std::runtime_error {
public:
  explicit invariant_violation(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mushy
