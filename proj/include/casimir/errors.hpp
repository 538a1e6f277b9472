#pragma once

#include <stdexcept>
#include <string>

namespace casimir {

/// Argument outside the domain of a special function or closed-form model.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Sphere and cylinder overlap or touch (a + b >= 1), or a length is nonpositive.
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A truncation or quadrature ladder failed to settle. Carries the last two iterates.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double previous = 0.0, double last = 0.0)
      : std::runtime_error(what), previous_(previous), last_(last) {}
  double previous() const noexcept { return previous_; }
  double last() const noexcept { return last_; }

 private:
  double previous_;
  double last_;
};

/// det(I - M) <= 0: the round-trip operator has an eigenvalue >= 1.
class SpectralRadiusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A T-matrix denominator vanished to working precision.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace casimir
