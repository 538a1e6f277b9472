#pragma once

#include <span>
#include <vector>

namespace casimir::specfun {

/// Exponentially scaled modified Bessel functions of one order at one argument.
///
/// i_scaled = e^{-z} I_nu(z), k_scaled = e^{z} K_nu(z), and the derivatives carry the
/// same factors: di_scaled = e^{-z} I'_nu(z), dk_scaled = e^{z} K'_nu(z).
struct ScaledBesselPair {
  double order = 0.0;
  double argument = 0.0;
  double i_scaled = 0.0;
  double k_scaled = 0.0;
  double di_scaled = 0.0;
  double dk_scaled = 0.0;
};

/// Scaled I and K for nu in {0, 1, 2, ...} or {1/2, 3/2, ...}.
/// Throws DomainError for z <= 0 or any other order.
ScaledBesselPair bessel_ik_scaled(double nu, double z);

/// Logarithms of scaled I and K for the ladder nu = base, base + 1, ..., base + count - 1.
///
/// Everything is carried as logs or ratios so that orders far beyond the argument stay
/// representable. base must be 0 or 1/2.
struct BesselLogSequence {
  double base = 0.0;
  double z = 0.0;
  std::vector<double> log_i;    ///< ln(e^{-z} I_{base+j}(z))
  std::vector<double> log_k;    ///< ln(e^{z} K_{base+j}(z))
  std::vector<double> i_ratio;  ///< I_{base+j+1}(z) / I_{base+j}(z)
  std::vector<double> k_ratio;  ///< K_{base+j+1}(z) / K_{base+j}(z)

  double order(int j) const { return base + j; }
  int size() const { return static_cast<int>(log_k.size()); }
};

BesselLogSequence bessel_log_sequence(double base, int count, double z);

/// Only the K half of the ladder: ln(e^{z} K_{base+j}(z)), j = 0..count-1, written to out.
void bessel_log_k_ladder(double base, double z, std::span<double> out);

/// Real rotated associated Legendre functions on the imaginary axis.
///
/// pbar[l - m] = i^{-(l+m)} P_l^m(i t) and qbar[l - m] = i^{-(l+m-1)} dP_l^m/dz (i t),
/// Condon-Shortley convention, for l = m..l_max.
struct RotatedLegendreTable {
  int m = 0;
  int l_max = 0;
  double t = 0.0;
  std::vector<double> pbar;
  std::vector<double> qbar;

  double p(int l) const { return pbar[static_cast<std::size_t>(l - m)]; }
  double q(int l) const { return qbar[static_cast<std::size_t>(l - m)]; }
};

RotatedLegendreTable rotated_legendre(int m, int l_max, double t);

/// Normalized, cosh-scaled variant used by the kernel:
///   p[l - m] = N_lm Pbar_l^m(t) / c^l,  q[l - m] = N_lm Qbar_l^m(t) / c^(l-1),
/// with c = sqrt(1 + t^2) and N_lm = sqrt((2l+1)(l-m)!/(l+m)!).
/// Both spans must hold l_max - m + 1 values.
void normalized_rotated_legendre(int m, int l_max, double t, std::span<double> p,
                                 std::span<double> q);

/// ln sqrt((2l+1)(l-|m|)!/(l+|m|)!). Throws DomainError when |m| > l.
double log_norm(int l, int m);

/// ln(n!) from an immutable table (falls back to lgamma past the table).
double log_factorial(int n);

}  // namespace casimir::specfun
