#include "casimir/asymptotics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <numbers>

#include "casimir/errors.hpp"
#include "casimir/quadrature.hpp"
#include "casimir/specfun.hpp"

namespace casimir::asymptotics {
namespace {

constexpr double kPi = std::numbers::pi;

void require_radii(double r1, double r2) {
  if (!(r1 > 0.0) || !(r2 > 0.0) || !std::isfinite(r1) || !std::isfinite(r2)) {
    throw DomainError("radii must be positive and finite");
  }
}

void require_gap(double d) {
  if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("separation d must be positive");
}

// -(pi^3 / 1440) R1 sqrt(R2 / (R1 + R2)), the coefficient of 1/d^2 in the scalar PFA energy.
double pfa_coefficient(BoundaryCondition bc, double r1, double r2) {
  return -de_alpha(bc) * std::pow(kPi, 3) / 1440.0 * r1 * std::sqrt(r2 / (r1 + r2));
}

// Integrand omega^p cosh-weight(theta) sum_nu coeff[nu] K_nu(omega cosh theta)^2.
struct IntegralSpec {
  const char* name;
  int power;
  std::array<double, 3> coeff;
  double exact;
  double (*theta_weight)(double ch, double sh);
};

const std::array<IntegralSpec, 6>& specs() {
  static const std::array<IntegralSpec, 6> table = {{
      {"dirichlet_w1_cosh_K0sq", 1, {1.0, 0.0, 0.0}, kPi / 2.0,
       [](double ch, double) { return ch; }},
      {"neumann_w5_cosh3_K0sq_2K1sq", 5, {1.0, 2.0, 0.0}, 32.0 * kPi / 15.0,
       [](double ch, double) { return ch * ch * ch; }},
      {"neumann_w5_cosh3sinh2_K0sq_2K1sq", 5, {1.0, 2.0, 0.0}, 32.0 * kPi / 15.0,
       [](double ch, double sh) { return ch * ch * ch * sh * sh; }},
      {"neumann_w5_cosh5_K0sq_K1sq_K2sq", 5, {1.0, 1.0, 1.0}, 136.0 * kPi / 15.0,
       [](double ch, double) { return ch * ch * ch * ch * ch; }},
      {"pec_w3_cosh3_K0sq", 3, {1.0, 0.0, 0.0}, kPi / 3.0,
       [](double ch, double) { return ch * ch * ch; }},
      {"pec_w3_cosh_2sinh2m1_K1sq", 3, {0.0, 1.0, 0.0}, kPi / 3.0,
       [](double ch, double sh) { return ch * (2.0 * sh * sh - 1.0); }},
  }};
  return table;
}

using Sums = std::array<double, 6>;

// Inner omega integral at fixed theta, in u = ln(omega) over the window where the
// integrands are above roundoff.
Sums inner_omega(double theta, int panels_per_unit) {
  const double ch = std::cosh(theta);
  const double sh = std::sinh(theta);
  const double lo = -25.0 - std::log(ch);
  const double hi = std::log(45.0 / ch);
  const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) * panels_per_unit)));
  const quadrature::Rule rule = quadrature::composite_gauss_legendre(lo, hi, panels, 16);
  std::array<quadrature::CompensatedSum, 6> acc;
  std::array<double, 3> logk{};
  for (std::size_t j = 0; j < rule.size(); ++j) {
    const double u = rule.nodes[j];
    const double omega = std::exp(u);
    const double z = omega * ch;
    specfun::bessel_log_k_ladder(0.0, z, logk);
    std::array<double, 3> ksq{};
    for (int nu = 0; nu < 3; ++nu) ksq[nu] = std::exp(2.0 * logk[nu] - 2.0 * z);
    for (std::size_t s = 0; s < 6; ++s) {
      const IntegralSpec& sp = specs()[s];
      double k = 0.0;
      for (int nu = 0; nu < 3; ++nu) k += sp.coeff[nu] * ksq[nu];
      // d omega = omega du
      acc[s].add(rule.weights[j] * std::pow(omega, sp.power + 1) * k);
    }
  }
  Sums out{};
  for (std::size_t s = 0; s < 6; ++s) {
    out[s] = acc[s].value() * specs()[s].theta_weight(ch, sh);
  }
  return out;
}

Sums double_integrals(int level, int threads) {
  const int refine = 1 << level;
  const double theta_max = 42.0;
  const quadrature::Rule rule =
      quadrature::composite_gauss_legendre(0.0, theta_max, 42 * refine, 16);
  const int n = static_cast<int>(rule.size());
  const int workers = std::clamp(threads, 1, n);
  auto chunk = [&](int begin, int end) {
    std::array<quadrature::CompensatedSum, 6> acc;
    for (int j = begin; j < end; ++j) {
      const Sums v = inner_omega(rule.nodes[static_cast<std::size_t>(j)], refine);
      for (std::size_t s = 0; s < 6; ++s) acc[s].add(rule.weights[static_cast<std::size_t>(j)] * v[s]);
    }
    Sums out{};
    for (std::size_t s = 0; s < 6; ++s) out[s] = acc[s].value();
    return out;
  };
  std::vector<std::future<Sums>> parts;
  for (int w = 0; w < workers; ++w) {
    const int begin = n * w / workers;
    const int end = n * (w + 1) / workers;
    parts.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, chunk,
                               begin, end));
  }
  Sums total{};
  for (auto& p : parts) {
    const Sums v = p.get();
    for (std::size_t s = 0; s < 6; ++s) total[s] += v[s];
  }
  // even in theta
  for (double& t : total) t *= 2.0;
  return total;
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::SphereCylinder: return "sphere-cylinder";
    case Family::SphereSphere: return "sphere-sphere";
    case Family::CylinderCylinder: return "cylinder-cylinder";
  }
  return "unknown";
}

double far_energy(BoundaryCondition bc, Family family, double r1, double r2, double L, double h) {
  require_radii(r1, r2);
  if (!(L > r1 + r2) || !std::isfinite(L)) {
    throw DomainError("center distance must exceed R1 + R2");
  }
  const double l2 = L * L;
  switch (family) {
    case Family::SphereCylinder: {
      const double log2 = std::log(L / r2);
      if (!(log2 > 0.0)) throw DomainError("ln(L/R2) must be positive");
      switch (bc) {
        case BoundaryCondition::Dirichlet: return -r1 / (4.0 * kPi * l2 * log2);
        case BoundaryCondition::Neumann:
          return -71.0 * std::pow(r1, 3) * r2 * r2 / (45.0 * kPi * std::pow(L, 6));
        case BoundaryCondition::PerfectConductor:
          return -std::pow(r1, 3) / (4.0 * kPi * l2 * l2 * log2);
      }
      break;
    }
    case Family::SphereSphere: {
      switch (bc) {
        case BoundaryCondition::Dirichlet: return -r1 * r2 / (4.0 * kPi * l2 * L);
        case BoundaryCondition::Neumann:
          return -161.0 * std::pow(r1 * r2, 3) / (96.0 * kPi * std::pow(L, 7));
        case BoundaryCondition::PerfectConductor:
          return -143.0 * std::pow(r1 * r2, 3) / (16.0 * kPi * std::pow(L, 7));
      }
      break;
    }
    case Family::CylinderCylinder: {
      if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("cylinder length must be positive");
      const double log1 = std::log(L / r1);
      const double log2 = std::log(L / r2);
      switch (bc) {
        case BoundaryCondition::Dirichlet:
        case BoundaryCondition::PerfectConductor:
          return -h / (8.0 * kPi * l2 * log1 * log2);
        case BoundaryCondition::Neumann:
          return -7.0 * h * r1 * r1 * r2 * r2 / (5.0 * kPi * std::pow(L, 6));
      }
      break;
    }
  }
  throw DomainError("unknown boundary condition or family");
}

double pfa_energy(BoundaryCondition bc, double r1, double r2, double d) {
  require_radii(r1, r2);
  require_gap(d);
  return pfa_coefficient(bc, r1, r2) / (d * d);
}

double pfa_force(BoundaryCondition bc, double r1, double r2, double d) {
  require_radii(r1, r2);
  require_gap(d);
  return 2.0 * pfa_coefficient(bc, r1, r2) / (d * d * d);
}

double de_beta(BoundaryCondition bc) {
  const double pi2 = kPi * kPi;
  switch (bc) {
    case BoundaryCondition::Dirichlet: return 2.0 / 3.0;
    case BoundaryCondition::Neumann: return 2.0 / 3.0 * (1.0 - 30.0 / pi2);
    case BoundaryCondition::PerfectConductor: return 2.0 / 3.0 * (1.0 - 15.0 / pi2);
  }
  throw DomainError("unknown boundary condition");
}

double de_alpha(BoundaryCondition bc) {
  return bc == BoundaryCondition::PerfectConductor ? 2.0 : 1.0;
}

double de_bracket(BoundaryCondition bc, double r1, double r2, double d) {
  require_radii(r1, r2);
  require_gap(d);
  const double beta = de_beta(bc);
  return 1.0 - 0.625 * d / (r1 + r2) + (2.0 * beta - 1.0) * d / r1 + (beta - 0.375) * d / r2;
}

double de_energy(BoundaryCondition bc, double r1, double r2, double d) {
  return pfa_energy(bc, r1, r2, d) * de_bracket(bc, r1, r2, d);
}

double NamedConstant::relative_error() const { return std::fabs(value - exact) / std::fabs(exact); }

std::vector<NamedConstant> far_integral_constants(double rel_tol, int threads) {
  if (!(rel_tol > 0.0)) throw DomainError("rel_tol must be positive");
  constexpr int kMaxLevel = 3;
  Sums prev = double_integrals(0, threads);
  for (int level = 1; level <= kMaxLevel; ++level) {
    const Sums next = double_integrals(level, threads);
    double worst = 0.0;
    std::size_t worst_index = 0;
    for (std::size_t s = 0; s < 6; ++s) {
      const double change = std::fabs(next[s] - prev[s]) / std::fabs(next[s]);
      if (change > worst) {
        worst = change;
        worst_index = s;
      }
    }
    if (worst <= rel_tol) {
      std::vector<NamedConstant> out;
      for (std::size_t s = 0; s < 6; ++s) {
        out.push_back({specs()[s].name, next[s], specs()[s].exact});
      }
      return out;
    }
    if (level == kMaxLevel) {
      throw ConvergenceError(std::string("far-field integral did not settle: ") +
                                 specs()[worst_index].name,
                             prev[worst_index], next[worst_index]);
    }
    prev = next;
  }
  return {};
}

}  // namespace casimir::asymptotics
