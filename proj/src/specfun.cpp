#include "casimir/specfun.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "casimir/errors.hpp"

namespace casimir::specfun {
namespace {

constexpr double kEuler = 0.57721566490153286061;
constexpr double kEps = 1e-17;

// Classifies nu as integer (base 0) or half-integer (base 1/2).
bool split_order(double nu, double& base, int& offset) {
  if (!(nu >= 0.0) || !std::isfinite(nu)) return false;
  const double twice = 2.0 * nu;
  if (twice != std::floor(twice) || twice > 1e6) return false;
  const long n2 = static_cast<long>(twice);
  base = (n2 % 2 == 0) ? 0.0 : 0.5;
  offset = static_cast<int>(nu - base);
  return true;
}

// e^z K_0(z) and e^z K_1(z) from the ascending series, z <= 2.
void k01_series(double z, double& k0, double& k1) {
  const double y = 0.25 * z * z;
  const double lg = std::log(0.5 * z);
  double term0 = 1.0;  // (z^2/4)^k / (k!)^2
  double i0 = 1.0;
  double s0 = 0.0;
  double harmonic = 0.0;
  double term1 = 1.0;  // (z^2/4)^k / (k!(k+1)!)
  double i1 = 1.0;
  double s1 = -kEuler + (1.0 - kEuler);  // psi(1) + psi(2)
  for (int k = 1; k < 200; ++k) {
    term0 *= y / (static_cast<double>(k) * k);
    harmonic += 1.0 / k;
    i0 += term0;
    s0 += term0 * harmonic;
    term1 *= y / (static_cast<double>(k) * (k + 1));
    i1 += term1;
    const double psi_sum = (-kEuler + harmonic) + (-kEuler + harmonic + 1.0 / (k + 1));
    s1 += term1 * psi_sum;
    if (term0 < kEps * i0 && term1 < kEps * i1) break;
  }
  const double k0v = -(lg + kEuler) * i0 + s0;
  const double i1v = 0.5 * z * i1;
  const double k1v = 1.0 / z + lg * i1v - 0.25 * z * s1;
  const double ez = std::exp(z);
  k0 = k0v * ez;
  k1 = k1v * ez;
}

// e^z K_0(z) and e^z K_1(z) by Steed's continued fraction (Temme's CF2), z > 2.
void k01_cf2(double z, double& k0, double& k1) {
  const double xmu = 0.0;
  const double a1 = 0.25 - xmu * xmu;
  double b = 2.0 * (1.0 + z);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 1; i < 100000; ++i) {
    a -= 2.0 * i;
    c = -a * c / (i + 1.0);
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::fabs(dels / s) < kEps) break;
  }
  h = a1 * h;
  k0 = std::sqrt(std::numbers::pi / (2.0 * z)) / s;
  k1 = k0 * (xmu + z + 0.5 - h) / z;
}

// I_{nu+1}/I_nu by the continued fraction, modified Lentz.
double i_ratio_cf1(double nu, double z) {
  const double tiny = 1e-300;
  double f = tiny;
  double c = f;
  double d = 0.0;
  for (int i = 1; i < 1000000; ++i) {
    const double b = 2.0 * (nu + i) / z;
    d = b + d;
    if (d == 0.0) d = tiny;
    c = b + 1.0 / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return f;
}

void seed_k(double base, double z, double& k0, double& k1) {
  if (base == 0.0) {
    if (z <= 2.0) {
      k01_series(z, k0, k1);
    } else {
      k01_cf2(z, k0, k1);
    }
  } else {
    k0 = std::sqrt(std::numbers::pi / (2.0 * z));
    k1 = k0 * (1.0 + 1.0 / z);
  }
}

void check_sequence_args(double base, int count, double z) {
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw DomainError("modified Bessel functions need a positive finite argument");
  }
  if (base != 0.0 && base != 0.5) {
    throw DomainError("Bessel ladder base must be 0 or 1/2");
  }
  if (count < 1) throw DomainError("Bessel ladder needs at least one order");
}

constexpr int kFactTable = 4096;

struct LogFactorialTable {
  std::array<double, kFactTable> v{};
  LogFactorialTable() {
    v[0] = 0.0;
    for (int n = 1; n < kFactTable; ++n) v[n] = v[n - 1] + std::log(static_cast<double>(n));
  }
};

const LogFactorialTable& log_fact_table() {
  static const LogFactorialTable table;
  return table;
}

}  // namespace

double log_factorial(int n) {
  if (n < 0) throw DomainError("log_factorial of a negative integer");
  if (n < kFactTable) return log_fact_table().v[static_cast<std::size_t>(n)];
  return std::lgamma(static_cast<double>(n) + 1.0);
}

double log_norm(int l, int m) {
  const int am = m < 0 ? -m : m;
  if (l < 0 || am > l) {
    throw DomainError("log_norm needs |m| <= l, got l=" + std::to_string(l) +
                      " m=" + std::to_string(m));
  }
  return 0.5 * (std::log(2.0 * l + 1.0) + log_factorial(l - am) - log_factorial(l + am));
}

void bessel_log_k_ladder(double base, double z, std::span<double> out) {
  const int count = static_cast<int>(out.size());
  check_sequence_args(base, count, z);
  double k0 = 0.0;
  double k1 = 0.0;
  seed_k(base, z, k0, k1);
  out[0] = std::log(k0);
  double q = k1 / k0;
  for (int j = 1; j < count; ++j) {
    out[static_cast<std::size_t>(j)] = out[static_cast<std::size_t>(j - 1)] + std::log(q);
    q = 1.0 / q + 2.0 * (base + j) / z;
  }
}

BesselLogSequence bessel_log_sequence(double base, int count, double z) {
  check_sequence_args(base, count, z);
  BesselLogSequence s;
  s.base = base;
  s.z = z;
  const auto n = static_cast<std::size_t>(count);
  s.log_i.resize(n);
  s.log_k.resize(n);
  s.i_ratio.resize(n);
  s.k_ratio.resize(n);

  double k0 = 0.0;
  double k1 = 0.0;
  seed_k(base, z, k0, k1);
  s.log_k[0] = std::log(k0);
  s.k_ratio[0] = k1 / k0;
  for (std::size_t j = 1; j < n; ++j) {
    s.log_k[j] = s.log_k[j - 1] + std::log(s.k_ratio[j - 1]);
    s.k_ratio[j] = 1.0 / s.k_ratio[j - 1] + 2.0 * (base + static_cast<double>(j)) / z;
  }

  s.i_ratio[n - 1] = i_ratio_cf1(base + static_cast<double>(n - 1), z);
  for (std::size_t j = n - 1; j-- > 0;) {
    s.i_ratio[j] = 1.0 / (2.0 * (base + static_cast<double>(j) + 1.0) / z + s.i_ratio[j + 1]);
  }
  const double lz = std::log(z);
  for (std::size_t j = 0; j < n; ++j) {
    s.log_i[j] = -lz - s.log_k[j] - std::log(s.k_ratio[j] + s.i_ratio[j]);
  }
  return s;
}

ScaledBesselPair bessel_ik_scaled(double nu, double z) {
  double base = 0.0;
  int offset = 0;
  if (!split_order(nu, base, offset)) {
    throw DomainError("Bessel order must be a nonnegative integer or half-integer");
  }
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw DomainError("modified Bessel functions need a positive finite argument");
  }
  const BesselLogSequence s = bessel_log_sequence(base, offset + 1, z);
  const auto j = static_cast<std::size_t>(offset);
  ScaledBesselPair r;
  r.order = nu;
  r.argument = z;
  r.i_scaled = std::exp(s.log_i[j]);
  r.k_scaled = std::exp(s.log_k[j]);
  r.di_scaled = r.i_scaled * (nu / z + s.i_ratio[j]);
  r.dk_scaled = -r.k_scaled * (s.k_ratio[j] - nu / z);
  return r;
}

RotatedLegendreTable rotated_legendre(int m, int l_max, double t) {
  if (m < 0 || m > l_max) throw DomainError("rotated_legendre needs 0 <= m <= l_max");
  if (!std::isfinite(t)) throw DomainError("rotated_legendre needs a finite argument");
  RotatedLegendreTable tab;
  tab.m = m;
  tab.l_max = l_max;
  tab.t = t;
  const auto n = static_cast<std::size_t>(l_max - m + 1);
  tab.pbar.resize(n);
  tab.qbar.resize(n);
  const double one_t2 = 1.0 + t * t;
  double pmm = std::pow(one_t2, 0.5 * m);
  for (int k = 1; k <= m; ++k) pmm *= (2.0 * k - 1.0);
  tab.pbar[0] = pmm;
  if (n > 1) tab.pbar[1] = (2.0 * m + 1.0) * t * pmm;
  for (std::size_t j = 2; j < n; ++j) {
    const int l = m + static_cast<int>(j) - 1;
    tab.pbar[j] = ((2.0 * l + 1.0) * t * tab.pbar[j - 1] + (l + m) * tab.pbar[j - 2]) /
                  (l - m + 1.0);
  }
  for (std::size_t j = 0; j < n; ++j) {
    const int l = m + static_cast<int>(j);
    const double prev = j == 0 ? 0.0 : tab.pbar[j - 1];
    tab.qbar[j] = (l * t * tab.pbar[j] + (l + m) * prev) / one_t2;
  }
  return tab;
}

void normalized_rotated_legendre(int m, int l_max, double t, std::span<double> p,
                                 std::span<double> q) {
  if (m < 0 || m > l_max) throw DomainError("normalized_rotated_legendre needs 0 <= m <= l_max");
  const auto n = static_cast<std::size_t>(l_max - m + 1);
  if (p.size() < n || q.size() < n) throw DomainError("normalized_rotated_legendre: short output");
  const double c2 = 1.0 + t * t;
  const double c = std::sqrt(c2);
  const double tc = t / c;
  // N_mm (2m-1)!! = sqrt((2m+1)(2m)!) / (2^m m!)
  const double lp0 = 0.5 * std::log(2.0 * m + 1.0) + 0.5 * log_factorial(2 * m) -
                     m * std::numbers::ln2 - log_factorial(m);
  p[0] = std::exp(lp0);
  // ratio[l] = N_{l+1}/N_l
  auto nratio = [m](int l) {
    return std::sqrt((2.0 * l + 3.0) / (2.0 * l + 1.0) * (l + 1.0 - m) / (l + 1.0 + m));
  };
  if (n > 1) p[1] = (2.0 * m + 1.0) * tc * nratio(m) * p[0];
  for (std::size_t j = 2; j < n; ++j) {
    const int l = m + static_cast<int>(j) - 1;
    const double r1 = nratio(l);
    const double r0 = nratio(l - 1);
    p[j] = ((2.0 * l + 1.0) * tc * r1 * p[j - 1] + (l + m) / c2 * r1 * r0 * p[j - 2]) /
           (l - m + 1.0);
  }
  q[0] = m * tc * p[0];
  for (std::size_t j = 1; j < n; ++j) {
    const int l = m + static_cast<int>(j);
    q[j] = l * tc * p[j] + (l + m) * nratio(l - 1) * p[j - 1] / c2;
  }
}

}  // namespace casimir::specfun
