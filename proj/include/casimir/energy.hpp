#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "casimir/kernel.hpp"

namespace casimir::energy {

using kernel::BoundaryCondition;
using kernel::Geometry;
using kernel::PhysicalGeometry;

/// ln det(I - M) through dense factorization, one parity class at a time.
/// Throws SpectralRadiusError when a block has a nonpositive determinant.
double logdet_one_minus(const kernel::RoundTripMatrix& m);
double logdet_one_minus(const Eigen::MatrixXd& m, bool symmetric = false);
double logdet_one_minus(const kernel::SectorBlocks& blocks);

/// ln det(I - M(omega)) for the full truncated basis, via the reduced sector blocks.
double logdet_at(Geometry geom, BoundaryCondition bc, double omega, int l_max,
                 const kernel::QuadratureSpec& quad, kernel::KernelDiagnostics* diag = nullptr);

/// Frequency quadrature: omega = scale * u^2 / (1 - u^2), u in [0, u_cut], adaptive
/// Gauss-Kronrod (7/15) panels. scale <= 0 picks 1 / (2 gap).
struct OmegaRule {
  int initial_panels = 2;
  int max_panels = 64;
  double rel_tol = 0.0;        ///< 0: one tenth of the requested energy tolerance
  double cut_epsilon = 1e-16;  ///< envelope exp(-2 gap omega) at the cut, relative to its peak
  double scale = 0.0;
};

struct Sample {
  double omega = 0.0;
  double value = 0.0;
  double weight = 0.0;  ///< final quadrature weight of this node in the omega integral
};

struct OmegaIntegral {
  double value = 0.0;        ///< integral over omega in [0, infinity)
  double error = 0.0;        ///< absolute: Kronrod-Gauss difference plus tail bound
  double tail_bound = 0.0;
  int panels = 0;
  std::vector<Sample> samples;  ///< sorted by omega
};

/// Integrates f over [0, infinity) for an integrand decaying like exp(-2 gap omega).
/// Independent nodes of one panel may run concurrently on `threads` workers.
OmegaIntegral integrate_omega(const std::function<double(double)>& f, double gap,
                              const OmegaRule& rule, int threads = 1);

struct LadderStep {
  int l_max = 0;
  double e_dimensionless = 0.0;
};

struct EnergyDiagnostics {
  int l_max = 0;
  int n_max = 0;
  int theta_refinements = 0;   ///< largest over frequency nodes
  double theta_change = 0.0;   ///< largest relative diagonal change over frequency nodes
  double n_tail = 0.0;
  int omega_nodes = 0;
  int omega_panels = 0;
  double omega_error = 0.0;    ///< relative
  double tail_bound = 0.0;     ///< relative
  std::vector<LadderStep> ladder;
};

struct EnergyResult {
  double e_dimensionless = 0.0;  ///< E L / (hbar c)
  double e_over_e0 = 0.0;        ///< E / E0, E0 = hbar c / (2 pi R1)
  std::vector<Sample> integrand_samples;
  EnergyDiagnostics diagnostics;
  double error_estimate = 0.0;   ///< relative
};

struct ForceResult {
  double f_dimensionless = 0.0;  ///< F L^2 / (hbar c)
  double step = 0.0;             ///< coarse finite-difference step h, in units of L
  double richardson_error = 0.0; ///< |F(h) - F(h/2)| / |F|
  int l_max = 0;
  int omega_nodes = 0;
};

struct EnergyOptions {
  int l_max = 0;            ///< 0 selects default_l_max
  bool ladder = true;       ///< verify l_max -> l_max + 2 until the change is below rel_tol
  int ladder_steps = 8;     ///< hard cap on ladder steps
  double rel_tol = 1e-4;
  kernel::QuadratureSpec quad;
  OmegaRule omega;
  int threads = 1;
};

/// max(10, ceil(7 R_big / d)).
int default_l_max(const PhysicalGeometry& g);

EnergyResult casimir_energy(const PhysicalGeometry& g, BoundaryCondition bc,
                            const EnergyOptions& opts = {});

/// F = -dE/dd by central differences with h = 1e-3 d and h/2, Richardson-extrapolated.
/// The frequency nodes (in units of 1/L at the central gap) and theta rules are shared by
/// all four evaluations; l_max is fixed (no ladder).
ForceResult casimir_force(const PhysicalGeometry& g, BoundaryCondition bc,
                          const EnergyOptions& opts = {});

}  // namespace casimir::energy
