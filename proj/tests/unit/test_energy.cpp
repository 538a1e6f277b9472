#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "casimir/energy.hpp"
#include "casimir/errors.hpp"

using namespace casimir;
using namespace casimir::energy;
using BC = BoundaryCondition;

namespace {

// Li2(q) from its power series.
double dilog(double q) {
  double sum = 0.0;
  double p = q;
  for (int s = 1; s < 200; ++s, p *= q) sum += p / (static_cast<double>(s) * s);
  return sum;
}

EnergyOptions fixed(int l_max) {
  EnergyOptions o;
  o.l_max = l_max;
  o.ladder = false;
  return o;
}

}  // namespace

TEST_SUITE("energy") {

TEST_CASE("log determinant examples") {
  CHECK(logdet_one_minus(Eigen::MatrixXd::Zero(3, 3)) == 0.0);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 0.5;
  d(1, 1) = 0.25;
  CHECK(logdet_one_minus(d) == doctest::Approx(std::log(0.5) + std::log(0.75)).epsilon(1e-15));
  CHECK(logdet_one_minus(d) == doctest::Approx(-0.980829).epsilon(1e-6));
  CHECK(logdet_one_minus(d, true) == doctest::Approx(-0.980829).epsilon(1e-6));
}

TEST_CASE("log determinant against an eigenvalue oracle") {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd a(5, 5);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) a(i, j) = u(rng);
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
    a *= 0.8 / es.eigenvalues().cwiseAbs().maxCoeff();
    const Eigen::VectorXcd lam = Eigen::EigenSolver<Eigen::MatrixXd>(a, false).eigenvalues();
    std::complex<double> want = 0.0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) want += std::log(1.0 - lam(i));
    CHECK(std::fabs(logdet_one_minus(a) - want.real()) < 1e-10);
  }
}

TEST_CASE("nonpositive determinant signals the spectral radius") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = 2.0;
  CHECK_THROWS_AS(logdet_one_minus(m), SpectralRadiusError);
  m(0, 0) = 1.0;
  CHECK_THROWS_AS(logdet_one_minus(m), SpectralRadiusError);
  CHECK_THROWS_AS(logdet_one_minus(Eigen::MatrixXd::Zero(2, 3)), DomainError);
}

TEST_CASE("toy kernel q exp(-2 omega) reproduces -Li2(q)/2") {
  for (double q : {0.1, 0.5, 0.9}) {
    OmegaRule rule;
    rule.rel_tol = 1e-12;
    const OmegaIntegral r =
        integrate_omega([q](double w) { return std::log1p(-q * std::exp(-2.0 * w)); }, 1.0, rule);
    CHECK(std::fabs(r.value + 0.5 * dilog(q)) < 1e-10);
    CHECK(std::fabs(r.value + 0.5 * dilog(q)) <= r.error + 1e-15);
  }
  OmegaRule rule;
  const OmegaIntegral r =
      integrate_omega([](double w) { return std::log1p(-0.1 * std::exp(-2.0 * w)); }, 1.0, rule);
  CHECK(r.value == doctest::Approx(-0.0513088955497).epsilon(1e-10));
}

TEST_CASE("omega samples are sorted and carry the final weights") {
  OmegaRule rule;
  const OmegaIntegral r = integrate_omega([](double w) { return -std::exp(-w); }, 0.5, rule, 2);
  double acc = 0.0;
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    if (i > 0) CHECK(r.samples[i].omega > r.samples[i - 1].omega);
    acc += r.samples[i].weight * r.samples[i].value;
  }
  CHECK(acc == doctest::Approx(r.value).epsilon(1e-13));
  CHECK(r.value == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK_THROWS_AS(integrate_omega([](double) { return 0.0; }, 0.0, rule), DomainError);
}

TEST_CASE("default truncation heuristic") {
  CHECK(default_l_max(PhysicalGeometry{1.0, 1.0, 100.0}) == 10);
  CHECK(default_l_max(PhysicalGeometry{1.0, 1.0, 0.1}) == 70);
  CHECK(default_l_max(PhysicalGeometry{1.0, 3.0, 1.0}) == 21);
  CHECK_THROWS_AS(default_l_max(PhysicalGeometry{1.0, 1.0, 0.0}), GeometryError);
}

TEST_CASE("energy is negative and grows toward zero with the gap") {
  for (BC bc : {BC::Dirichlet, BC::Neumann}) {
    double prev = -INFINITY;
    for (double d : {1.0, 2.0, 5.0, 10.0}) {
      const EnergyResult e = casimir_energy(PhysicalGeometry{1.0, 1.0, d}, bc, fixed(5));
      CHECK(e.e_dimensionless < 0.0);
      CHECK(e.e_dimensionless > prev);
      CHECK(std::fabs(e.e_over_e0 - 2.0 * std::numbers::pi / (2.0 + d) * e.e_dimensionless) < 1e-15);
      // far-tail nodes round to ln 1 = 0
      int negative = 0;
      for (const Sample& s : e.integrand_samples) {
        CHECK(s.value <= 0.0);
        negative += s.value < 0.0 ? 1 : 0;
      }
      CHECK(2 * negative > static_cast<int>(e.integrand_samples.size()));
      prev = e.e_dimensionless;
    }
  }
}

TEST_CASE("scale invariance") {
  const EnergyResult e1 = casimir_energy(PhysicalGeometry{1.0, 0.5, 3.0}, BC::Neumann, fixed(5));
  const EnergyResult e2 = casimir_energy(PhysicalGeometry{2.0, 1.0, 6.0}, BC::Neumann, fixed(5));
  CHECK(std::fabs(e1.e_dimensionless - e2.e_dimensionless) <= 1e-12 * std::fabs(e1.e_dimensionless));
  // E = e_dimensionless hbar c / L, so doubling every length halves E
  CHECK(std::fabs(e2.e_dimensionless / 12.0 - 0.5 * e1.e_dimensionless / 6.0) <
        1e-12 * std::fabs(e1.e_dimensionless));
}

TEST_CASE("omega and theta doubling stay within the error estimate") {
  const PhysicalGeometry g{1.0, 1.0, 2.0};
  for (BC bc : {BC::Dirichlet, BC::PerfectConductor}) {
    const EnergyResult base = casimir_energy(g, bc, fixed(6));
    EnergyOptions o = fixed(6);
    o.omega.initial_panels = 4;
    const EnergyResult om = casimir_energy(g, bc, o);
    CHECK(std::fabs(om.e_dimensionless - base.e_dimensionless) <=
          base.error_estimate * std::fabs(base.e_dimensionless));
    o = fixed(6);
    o.quad.theta_panel_width = 0.25;
    const EnergyResult th = casimir_energy(g, bc, o);
    CHECK(std::fabs(th.e_dimensionless - base.e_dimensionless) <=
          base.error_estimate * std::fabs(base.e_dimensionless));
    CHECK(base.error_estimate > 0.0);
    CHECK(base.error_estimate < 1e-4);
  }
}

TEST_CASE("diagnostics are filled") {
  const EnergyResult e = casimir_energy(PhysicalGeometry{1.0, 1.0, 4.0}, BC::Dirichlet, fixed(4));
  CHECK(e.diagnostics.l_max == 4);
  CHECK(e.diagnostics.n_max > 0);
  CHECK(e.diagnostics.omega_nodes == static_cast<int>(e.integrand_samples.size()));
  CHECK(e.diagnostics.omega_nodes >= 30);
  CHECK(e.diagnostics.ladder.size() == 1u);
  CHECK(e.diagnostics.tail_bound < 1e-12);
}

TEST_CASE("l_max ladder") {
  EnergyOptions o;
  o.l_max = 4;
  o.rel_tol = 1e-3;
  const EnergyResult e = casimir_energy(PhysicalGeometry{1.0, 1.0, 5.0}, BC::Dirichlet, o);
  const auto& lad = e.diagnostics.ladder;
  REQUIRE(lad.size() >= 2u);
  CHECK(lad.back().l_max == e.diagnostics.l_max);
  CHECK(std::fabs(lad.back().e_dimensionless - lad[lad.size() - 2].e_dimensionless) <
        1e-3 * std::fabs(lad.back().e_dimensionless));
  // the truncated energies approach the limit from above
  CHECK(lad.back().e_dimensionless <= lad.front().e_dimensionless);

  o.rel_tol = 1e-13;
  o.ladder_steps = 1;
  try {
    casimir_energy(PhysicalGeometry{1.0, 1.0, 1.0}, BC::Dirichlet, o);
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& err) {
    CHECK(err.previous() != err.last());
    CHECK(err.last() < 0.0);
  }
}

TEST_CASE("Born bound at every sampled node") {
  const Geometry g = PhysicalGeometry{1.0, 1.0, 1.5}.reduced();
  for (BC bc : {BC::Dirichlet, BC::Neumann, BC::PerfectConductor}) {
    for (double omega : {0.05, 0.3, 1.0, 3.0, 10.0}) {
      const kernel::RoundTripMatrix m =
          kernel::assemble_matrix(g, omega, kernel::ModeBasis::build(bc, 5), {});
      const double rho =
          Eigen::EigenSolver<Eigen::MatrixXd>(m.values, false).eigenvalues().cwiseAbs().maxCoeff();
      REQUIRE(rho < 1.0);
      const double lhs = std::fabs(logdet_one_minus(m) + m.values.trace());
      CHECK(lhs <= m.values.squaredNorm() / (1.0 - rho));
    }
  }
}

TEST_CASE("force is attractive and Richardson-consistent") {
  for (BC bc : {BC::Dirichlet, BC::Neumann}) {
    const ForceResult f = casimir_force(PhysicalGeometry{1.0, 1.0, 5.0}, bc, fixed(5));
    CHECK(f.f_dimensionless < 0.0);
    CHECK(f.richardson_error < 1e-4);
    CHECK(f.step == doctest::Approx(5e-3 / 7.0));
    CHECK(f.l_max == 5);
  }
}

TEST_CASE("force agrees with a finite difference of energies") {
  const double d = 2.0;
  const double h = 0.02;
  const EnergyResult ep = casimir_energy(PhysicalGeometry{1.0, 1.0, d + h}, BC::Dirichlet, fixed(5));
  const EnergyResult em = casimir_energy(PhysicalGeometry{1.0, 1.0, d - h}, BC::Dirichlet, fixed(5));
  const double fd = -(ep.e_dimensionless / (2.0 + d + h) - em.e_dimensionless / (2.0 + d - h)) / (2.0 * h);
  const ForceResult f = casimir_force(PhysicalGeometry{1.0, 1.0, d}, BC::Dirichlet, fixed(5));
  const double len = 2.0 + d;
  CHECK(f.f_dimensionless / (len * len) == doctest::Approx(fd).epsilon(1e-3));
}

TEST_CASE("option validation") {
  EnergyOptions o;
  o.rel_tol = 0.0;
  CHECK_THROWS_AS(casimir_energy(PhysicalGeometry{1.0, 1.0, 1.0}, BC::Dirichlet, o), DomainError);
  o.rel_tol = 1e-4;
  o.l_max = -1;
  CHECK_THROWS_AS(casimir_energy(PhysicalGeometry{1.0, 1.0, 1.0}, BC::Dirichlet, o), DomainError);
  CHECK_THROWS_AS(casimir_energy(PhysicalGeometry{1.0, 1.0, -1.0}, BC::Dirichlet), GeometryError);
}

}  // TEST_SUITE
