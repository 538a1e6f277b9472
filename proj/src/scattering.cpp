#include "casimir/scattering.hpp"

#include <cmath>
#include <vector>

#include "casimir/errors.hpp"
#include "casimir/specfun.hpp"

namespace casimir::scattering {
namespace {

constexpr double kSingular = 1e-300;

enum class SphereForm { IoverK, Neumann, Magnetic };
enum class CylinderForm { IoverK, Derivative };

SphereForm sphere_form(BoundaryCondition bc, Polarization pol) {
  if (!valid_channel(bc, pol)) {
    throw DomainError("polarization " + to_string(pol) + " does not belong to " + to_string(bc));
  }
  if (bc == BoundaryCondition::Dirichlet || pol == Polarization::TE) return SphereForm::IoverK;
  if (bc == BoundaryCondition::Neumann) return SphereForm::Neumann;
  return SphereForm::Magnetic;
}

CylinderForm cylinder_form(BoundaryCondition bc, Polarization pol) {
  if (!valid_channel(bc, pol)) {
    throw DomainError("polarization " + to_string(pol) + " does not belong to " + to_string(bc));
  }
  if (bc == BoundaryCondition::Dirichlet || pol == Polarization::TM) return CylinderForm::IoverK;
  return CylinderForm::Derivative;
}

void check_argument(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("T-matrix elements need a positive finite argument");
  }
}

}  // namespace

std::string to_string(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::Dirichlet: return "dirichlet";
    case BoundaryCondition::Neumann: return "neumann";
    case BoundaryCondition::PerfectConductor: return "pec";
  }
  return "?";
}

std::string to_string(Polarization pol) {
  switch (pol) {
    case Polarization::Scalar: return "scalar";
    case Polarization::TE: return "TE";
    case Polarization::TM: return "TM";
  }
  return "?";
}

bool valid_channel(BoundaryCondition bc, Polarization pol) {
  if (bc == BoundaryCondition::PerfectConductor) return pol != Polarization::Scalar;
  return pol == Polarization::Scalar;
}

void sphere_t_scaled_sequence(BoundaryCondition bc, Polarization pol, double x,
                              std::span<LogMagnitude> out) {
  check_argument(x);
  const SphereForm form = sphere_form(bc, pol);
  const int count = static_cast<int>(out.size());
  if (count == 0) return;
  const auto s = specfun::bessel_log_sequence(0.5, count, x);
  for (int l = 0; l < count; ++l) {
    const auto j = static_cast<std::size_t>(l);
    LogMagnitude& t = out[j];
    const double base = s.log_i[j] - s.log_k[j];
    switch (form) {
      case SphereForm::IoverK:
        t.log_abs = base;
        t.sign = 1.0;
        break;
      case SphereForm::Neumann: {
        // (-I/2 + x I') / (-K/2 + x K') = -(I/K) (l + x rho) / (x q - l)
        const double num = l + x * s.i_ratio[j];
        const double den = x * s.k_ratio[j] - l;
        if (!(std::fabs(den) > kSingular)) throw SingularityError("Neumann sphere denominator vanished");
        t.log_abs = base + std::log(num) - std::log(den);
        t.sign = -1.0;
        break;
      }
      case SphereForm::Magnetic: {
        // (I/2 + x I') / (K/2 + x K') = -(I/K) (l + 1 + x rho) / (x q - l - 1)
        const double num = l + 1.0 + x * s.i_ratio[j];
        const double den = x * s.k_ratio[j] - l - 1.0;
        if (!(std::fabs(den) > kSingular)) throw SingularityError("TM sphere denominator vanished");
        t.log_abs = base + std::log(num) - std::log(den);
        t.sign = -1.0;
        break;
      }
    }
    if (pol != Polarization::Scalar && l == 0) t = LogMagnitude{};
  }
}

void cylinder_t_scaled_sequence(BoundaryCondition bc, Polarization pol, double y,
                                std::span<LogMagnitude> out) {
  check_argument(y);
  const CylinderForm form = cylinder_form(bc, pol);
  const int count = static_cast<int>(out.size());
  if (count == 0) return;
  const auto s = specfun::bessel_log_sequence(0.0, count, y);
  for (int n = 0; n < count; ++n) {
    const auto j = static_cast<std::size_t>(n);
    LogMagnitude& t = out[j];
    const double base = s.log_i[j] - s.log_k[j];
    if (form == CylinderForm::IoverK) {
      t.log_abs = base;
      t.sign = 1.0;
      continue;
    }
    // I'_n / K'_n = -(I/K) (rho_n + n/y) / (q_n - n/y), q_n - n/y = 1/q_{n-1} + n/y
    const double num = s.i_ratio[j] + n / y;
    const double den = n == 0 ? s.k_ratio[0] : 1.0 / s.k_ratio[j - 1] + n / y;
    t.log_abs = base + std::log(num) - std::log(den);
    t.sign = -1.0;
  }
}

LogMagnitude sphere_t_log(BoundaryCondition bc, int l, Polarization pol, double x) {
  check_argument(x);
  sphere_form(bc, pol);
  if (l < 0) throw DomainError("sphere degree must be nonnegative");
  if (pol != Polarization::Scalar && l == 0) {
    throw DomainError("electromagnetic sphere channels start at l = 1");
  }
  std::vector<LogMagnitude> seq(static_cast<std::size_t>(l + 1));
  sphere_t_scaled_sequence(bc, pol, x, seq);
  LogMagnitude r = seq.back();
  r.log_abs += 2.0 * x;
  return r;
}

double sphere_t(BoundaryCondition bc, int l, Polarization pol, double x) {
  return sphere_t_log(bc, l, pol, x).value();
}

LogMagnitude cylinder_t_log(BoundaryCondition bc, int n, Polarization pol, double y) {
  check_argument(y);
  cylinder_form(bc, pol);
  const int an = n < 0 ? -n : n;
  std::vector<LogMagnitude> seq(static_cast<std::size_t>(an + 1));
  cylinder_t_scaled_sequence(bc, pol, y, seq);
  LogMagnitude r = seq.back();
  r.log_abs += 2.0 * y;
  return r;
}

double cylinder_t(BoundaryCondition bc, int n, Polarization pol, double y) {
  return cylinder_t_log(bc, n, pol, y).value();
}

}  // namespace casimir::scattering
