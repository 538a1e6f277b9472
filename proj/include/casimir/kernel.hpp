#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "casimir/scattering.hpp"

namespace casimir::kernel {

using scattering::BoundaryCondition;
using scattering::Polarization;

/// Lengths in units of L = R1 + R2 + d: a = R1/L, b = R2/L.
struct Geometry {
  double a = 0.0;
  double b = 0.0;

  double gap() const { return 1.0 - a - b; }
};

/// Validates a, b > 0 and a + b < 1; throws GeometryError otherwise.
Geometry make_geometry(double a, double b);

/// Sphere radius, cylinder radius and surface gap in arbitrary common units.
struct PhysicalGeometry {
  double r1 = 1.0;
  double r2 = 1.0;
  double d = 1.0;

  double length() const { return r1 + r2 + d; }
  /// Throws GeometryError for nonpositive or non-finite lengths.
  Geometry reduced() const;
};

struct ModeEntry {
  int l = 0;
  int m = 0;
  Polarization pol = Polarization::Scalar;
};

/// Sphere channels ordered by l, then m = -l..l, then TE before TM.
struct ModeBasis {
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  int l_max = 0;
  std::vector<ModeEntry> entries;
  std::vector<int> parity_class;  ///< (l - m) mod 2, plus 1 for TM

  static ModeBasis build(BoundaryCondition bc, int l_max);

  std::size_t size() const { return entries.size(); }
  bool is_em() const { return bc == BoundaryCondition::PerfectConductor; }
  /// Position of (l, m, pol) or -1 when absent.
  std::ptrdiff_t index_of(int l, int m, Polarization pol = Polarization::Scalar) const;
};

/// Plain: the rotated real matrix itself.
/// Balanced: diag(|T1|^{-1/2}) M diag(|T1|^{1/2}); same determinant, entries stay O(1).
enum class KernelForm { Plain, Balanced };

struct QuadratureSpec {
  int theta_order = 16;               ///< Gauss-Legendre nodes per panel
  double theta_panel_width = 0.5;     ///< initial panel width in theta
  double theta_cutoff_epsilon = 1e-18;
  double theta_rel_tol = 1e-9;        ///< accepted relative change of the diagonal under doubling
  int theta_max_refinements = 6;
  double n_rel_tol = 1e-16;           ///< relative mass of the last accepted |n| shell
  int n_hard_cap = 256;
  /// Integrate across the full line and keep cross-parity entries (diagnostic only).
  bool integrate_cross_parity = false;
  /// When both are positive the theta rule is fixed to these values and not refined.
  double fixed_theta_max = 0.0;
  int fixed_theta_panels = 0;
};

struct KernelDiagnostics {
  int theta_nodes = 0;
  int theta_panels = 0;
  double theta_max = 0.0;
  int theta_refinements = 0;
  double theta_change = 0.0;  ///< relative diagonal change between the last two theta rules
  int n_max = 0;              ///< largest |n| used at any theta node
  double n_tail = 0.0;        ///< largest estimated relative tail of the n sum
};

struct RoundTripMatrix {
  double omega = 0.0;
  double a = 0.0;
  double b = 0.0;
  ModeBasis basis;
  KernelForm form = KernelForm::Plain;
  Eigen::MatrixXd values;
  KernelDiagnostics diagnostics;
};

RoundTripMatrix assemble_scalar_matrix(Geometry geom, BoundaryCondition bc, double omega,
                                       const ModeBasis& basis, const QuadratureSpec& quad,
                                       KernelForm form = KernelForm::Plain);

RoundTripMatrix assemble_em_matrix(Geometry geom, double omega, const ModeBasis& basis,
                                   const QuadratureSpec& quad,
                                   KernelForm form = KernelForm::Plain);

/// Dispatches on basis.bc.
RoundTripMatrix assemble_matrix(Geometry geom, double omega, const ModeBasis& basis,
                                const QuadratureSpec& quad, KernelForm form = KernelForm::Plain);

/// Result of sum_n K_{n-m}(x) K_{m'-n}(x) T_n(y) with the exponential factors removed:
/// the true sum is exp(-2x + 2y) * sum.
struct NSumResult {
  double sum = 0.0;
  int n_max = 0;
  double tail_estimate = 0.0;  ///< relative size of the neglected shells
};

/// Adaptive |n|-shell summation; throws ConvergenceError past hard_cap.
NSumResult n_sum_terms(BoundaryCondition bc, Polarization pol, int m, int mp, double x, double y,
                       double rel_tol = 1e-16, int hard_cap = 256);

/// The same sum truncated at |n| <= n_max.
double n_sum_partial(BoundaryCondition bc, Polarization pol, int m, int mp, double x, double y,
                     int n_max);

/// Balanced round-trip matrix reduced by the m -> -m reflection and the parity classes.
/// det(I - M) equals the product of det(I - block) over all blocks.
struct SectorBlocks {
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<bool> symmetric;  ///< block is symmetric (scalar kinds)
  KernelDiagnostics diagnostics;
};

SectorBlocks assemble_sector_blocks(Geometry geom, BoundaryCondition bc, double omega, int l_max,
                                    const QuadratureSpec& quad);

/// Theta rule chosen by diagonal doubling; feed back through QuadratureSpec::fixed_theta_*
/// to reuse it at nearby geometries.
struct ThetaPlan {
  double theta_max = 0.0;
  int panels = 0;
  int refinements = 0;
  double change = 0.0;
};

ThetaPlan plan_theta(Geometry geom, BoundaryCondition bc, double omega, int l_max,
                     const QuadratureSpec& quad);

/// Upper end of the theta integration for the given truncation.
double theta_cutoff(Geometry geom, double omega, int l_max, double epsilon);

/// CSV dump with header row_l,row_m,row_pol,col_l,col_m,col_pol,value.
void write_matrix_csv(const RoundTripMatrix& m, std::ostream& out);

}  // namespace casimir::kernel
