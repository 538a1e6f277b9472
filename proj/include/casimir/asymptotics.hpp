#pragma once

#include <string>
#include <vector>

#include "casimir/scattering.hpp"

namespace casimir::asymptotics {

using scattering::BoundaryCondition;

enum class Family { SphereCylinder, SphereSphere, CylinderCylinder };

enum class ModelKind { FarLeading, PFA, DerivativeExpansion };

struct AsymptoticModel {
  ModelKind kind = ModelKind::FarLeading;
  Family family = Family::SphereCylinder;
};

std::string to_string(Family f);

/// Large-separation leading energy in units hbar = c = 1. L is the center distance.
/// For CylinderCylinder the result is proportional to the cylinder length `h`.
/// Throws DomainError when L <= R1 + R2 or a radius is nonpositive.
double far_energy(BoundaryCondition bc, Family family, double r1, double r2, double L,
                  double h = 1.0);

/// Proximity force approximation for the sphere-cylinder pair at surface gap d.
double pfa_energy(BoundaryCondition bc, double r1, double r2, double d);

/// -d/dd of pfa_energy.
double pfa_force(BoundaryCondition bc, double r1, double r2, double d);

/// Derivative-expansion coefficient beta for the boundary condition.
double de_beta(BoundaryCondition bc);

/// Polarization multiplicity: 1 for the scalar kinds, 2 for the perfect conductor.
double de_alpha(BoundaryCondition bc);

/// Bracket 1 - (5/8) d/(R1+R2) + (2 beta - 1) d/R1 + (beta - 3/8) d/R2.
double de_bracket(BoundaryCondition bc, double r1, double r2, double d);

/// PFA energy times the derivative-expansion bracket.
double de_energy(BoundaryCondition bc, double r1, double r2, double d);

struct NamedConstant {
  std::string name;
  double value = 0.0;  ///< numerical double integral
  double exact = 0.0;  ///< closed-form target
  double relative_error() const;
};

/// The six double integrals over omega in (0, inf) and theta in (-inf, inf) with Bessel
/// arguments omega cosh(theta) that enter the far-field leading terms.
/// Throws ConvergenceError when panel doubling does not settle to rel_tol.
std::vector<NamedConstant> far_integral_constants(double rel_tol = 1e-10, int threads = 1);

}  // namespace casimir::asymptotics
