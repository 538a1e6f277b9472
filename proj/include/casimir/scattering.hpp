#pragma once

#include <cmath>
#include <span>
#include <string>

namespace casimir::scattering {

enum class BoundaryCondition { Dirichlet, Neumann, PerfectConductor };
enum class Polarization { Scalar, TE, TM };
enum class Body { Sphere, Cylinder };

/// Identifies one diagonal T-matrix element: sphere degree l or cylinder order n.
struct ChannelId {
  Body body = Body::Sphere;
  int index = 0;
  Polarization pol = Polarization::Scalar;
};

/// Signed value stored as ln|v| and sign (sign is +1, -1, or 0 for an exact zero).
struct LogMagnitude {
  double log_abs = -INFINITY;
  double sign = 0.0;

  double value() const { return sign == 0.0 ? 0.0 : sign * std::exp(log_abs); }
};

std::string to_string(BoundaryCondition bc);
std::string to_string(Polarization pol);

/// True for (Dirichlet|Neumann, Scalar) and (PerfectConductor, TE|TM).
bool valid_channel(BoundaryCondition bc, Polarization pol);

/// Sphere T-matrix element at x = R1 kappa.
double sphere_t(BoundaryCondition bc, int l, Polarization pol, double x);
LogMagnitude sphere_t_log(BoundaryCondition bc, int l, Polarization pol, double x);

/// Cylinder T-matrix element at y = R2 sqrt(kappa^2 + k_z^2); even in n.
double cylinder_t(BoundaryCondition bc, int n, Polarization pol, double y);
LogMagnitude cylinder_t_log(BoundaryCondition bc, int n, Polarization pol, double y);

/// Sphere elements for l = 0..out.size()-1 with the e^{2x} growth removed:
/// out[l].log_abs = ln|T_l(x)| - 2x. Entries with l = 0 in the EM channels are left as zero.
void sphere_t_scaled_sequence(BoundaryCondition bc, Polarization pol, double x,
                              std::span<LogMagnitude> out);

/// Cylinder elements for n = 0..out.size()-1 with the e^{2y} growth removed.
void cylinder_t_scaled_sequence(BoundaryCondition bc, Polarization pol, double y,
                                std::span<LogMagnitude> out);

}  // namespace casimir::scattering
