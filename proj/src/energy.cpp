#include "casimir/energy.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <future>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>

#include "casimir/errors.hpp"
#include "casimir/quadrature.hpp"

namespace casimir::energy {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ln det of one block of I - B.
double block_logdet(const Eigen::MatrixXd& b, bool symmetric) {
  const auto n = b.rows();
  if (n == 0) return 0.0;
  Eigen::MatrixXd a = -b;
  a.diagonal().array() += 1.0;
  if (symmetric) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::MatrixXd& f = lu.matrixLU();
  double sign = lu.permutationP().determinant();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = f(i, i);
    if (!(u != 0.0) || !std::isfinite(u)) {
      throw SpectralRadiusError("det(I - M) vanished or is not finite");
    }
    if (u < 0.0) sign = -sign;
    acc += std::log(std::fabs(u));
  }
  if (sign <= 0.0) {
    throw SpectralRadiusError("det(I - M) <= 0: round-trip operator has spectral radius >= 1");
  }
  return acc;
}

// Evaluates f at all points, optionally on several workers; results keep input order.
std::vector<double> evaluate_all(const std::function<double(double)>& f,
                                 const std::vector<double>& pts, int threads) {
  std::vector<double> out(pts.size());
  if (threads <= 1 || pts.size() < 2) {
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = f(pts[i]);
    return out;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), pts.size());
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < pts.size(); i += workers) out[i] = f(pts[i]);
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

struct Panel {
  double lo = 0.0;
  double hi = 0.0;
  double kronrod = 0.0;
  double gauss = 0.0;
  std::vector<Sample> samples;

  double error() const { return std::fabs(kronrod - gauss); }
};

Panel eval_panel(const std::function<double(double)>& f, double lo, double hi, double scale,
                 int threads) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  using G = boost::math::quadrature::gauss<double, 7>;
  const auto& xk = GK::abscissa();
  const auto& wk = GK::weights();
  const auto& wg = G::weights();
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  std::vector<double> us;
  std::vector<double> wks;
  std::vector<double> wgs;
  for (std::size_t i = 0; i < xk.size(); ++i) {
    const double gw = (i % 2 == 0) ? wg[i / 2] : 0.0;
    if (i == 0) {
      us.push_back(mid);
      wks.push_back(wk[0]);
      wgs.push_back(gw);
      continue;
    }
    us.push_back(mid - half * xk[i]);
    wks.push_back(wk[i]);
    wgs.push_back(gw);
    us.push_back(mid + half * xk[i]);
    wks.push_back(wk[i]);
    wgs.push_back(gw);
  }
  std::vector<double> omegas(us.size());
  std::vector<double> jac(us.size());
  for (std::size_t i = 0; i < us.size(); ++i) {
    const double u = us[i];
    const double one = 1.0 - u * u;
    omegas[i] = scale * u * u / one;
    jac[i] = 2.0 * scale * u / (one * one);
  }
  const std::vector<double> vals = evaluate_all(f, omegas, threads);
  Panel p;
  p.lo = lo;
  p.hi = hi;
  quadrature::CompensatedSum k;
  quadrature::CompensatedSum g;
  for (std::size_t i = 0; i < us.size(); ++i) {
    const double v = vals[i] * jac[i] * half;
    k.add(wks[i] * v);
    g.add(wgs[i] * v);
    p.samples.push_back(Sample{omegas[i], vals[i], wks[i] * jac[i] * half});
  }
  p.kronrod = k.value();
  p.gauss = g.value();
  return p;
}

}  // namespace

double logdet_one_minus(const Eigen::MatrixXd& m, bool symmetric) {
  if (m.rows() != m.cols()) throw DomainError("logdet_one_minus needs a square matrix");
  if (!m.allFinite()) throw DomainError("logdet_one_minus needs finite entries");
  return block_logdet(m, symmetric);
}

double logdet_one_minus(const kernel::RoundTripMatrix& m) {
  const auto n = static_cast<Eigen::Index>(m.basis.size());
  if (m.values.rows() != n || m.values.cols() != n) {
    throw DomainError("round-trip matrix does not match its basis");
  }
  if (!m.values.allFinite()) throw DomainError("round-trip matrix has non-finite entries");
  double total = 0.0;
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (m.basis.parity_class[static_cast<std::size_t>(i)] == cls) idx.push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd blk(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) blk(i, j) = m.values(idx[i], idx[j]);
    }
    total += block_logdet(blk, false);
  }
  return total;
}

double logdet_one_minus(const kernel::SectorBlocks& blocks) {
  double total = 0.0;
  for (std::size_t i = 0; i < blocks.blocks.size(); ++i) {
    total += block_logdet(blocks.blocks[i], blocks.symmetric[i]);
  }
  return total;
}

double logdet_at(Geometry geom, BoundaryCondition bc, double omega, int l_max,
                 const kernel::QuadratureSpec& quad, kernel::KernelDiagnostics* diag) {
  const kernel::SectorBlocks sb = kernel::assemble_sector_blocks(geom, bc, omega, l_max, quad);
  if (diag) *diag = sb.diagnostics;
  return logdet_one_minus(sb);
}

OmegaIntegral integrate_omega(const std::function<double(double)>& f, double gap,
                              const OmegaRule& rule, int threads) {
  if (!(gap > 0.0)) throw DomainError("integrate_omega needs a positive decay rate");
  const double scale = rule.scale > 0.0 ? rule.scale : 1.0 / (2.0 * gap);
  const double rel_tol = rule.rel_tol > 0.0 ? rule.rel_tol : 1e-10;
  const double omega_cut = -std::log(rule.cut_epsilon) / (2.0 * gap);
  const double u_cut = std::sqrt(omega_cut / (scale + omega_cut));

  std::vector<Panel> panels;
  const int p0 = std::max(1, rule.initial_panels);
  for (int i = 0; i < p0; ++i) {
    panels.push_back(eval_panel(f, u_cut * i / p0, u_cut * (i + 1) / p0, scale, threads));
  }
  auto totals = [&](double& value, double& err) {
    quadrature::CompensatedSum v;
    quadrature::CompensatedSum e;
    for (const auto& p : panels) {
      v.add(p.kronrod);
      e.add(p.error());
    }
    value = v.value();
    err = e.value();
  };
  double value = 0.0;
  double err = 0.0;
  totals(value, err);
  while (err > rel_tol * std::fabs(value) && static_cast<int>(panels.size()) < rule.max_panels) {
    auto worst = std::max_element(panels.begin(), panels.end(),
                                  [](const Panel& x, const Panel& y) { return x.error() < y.error(); });
    const double lo = worst->lo;
    const double hi = worst->hi;
    const double mid = 0.5 * (lo + hi);
    panels.erase(worst);
    panels.push_back(eval_panel(f, lo, mid, scale, threads));
    panels.push_back(eval_panel(f, mid, hi, scale, threads));
    totals(value, err);
  }

  OmegaIntegral out;
  out.value = value;
  out.panels = static_cast<int>(panels.size());
  double fmax = 0.0;
  for (const auto& p : panels) {
    for (const auto& s : p.samples) {
      out.samples.push_back(s);
      fmax = std::max(fmax, std::fabs(s.value));
    }
  }
  std::sort(out.samples.begin(), out.samples.end(),
            [](const Sample& x, const Sample& y) { return x.omega < y.omega; });
  // the integrand is bounded by its sampled maximum times the decay envelope past the cut
  out.tail_bound = fmax * rule.cut_epsilon / (2.0 * gap);
  out.error = err + out.tail_bound;
  return out;
}

int default_l_max(const PhysicalGeometry& g) {
  if (!(g.d > 0.0)) throw GeometryError("the surface gap must be positive");
  const double big = std::max(g.r1, g.r2);
  return std::max(10, static_cast<int>(std::ceil(7.0 * big / g.d)));
}

namespace {

struct DiagCollector {
  std::mutex mu;
  kernel::KernelDiagnostics worst;

  void add(const kernel::KernelDiagnostics& d) {
    std::lock_guard<std::mutex> lock(mu);
    worst.n_max = std::max(worst.n_max, d.n_max);
    worst.n_tail = std::max(worst.n_tail, d.n_tail);
    worst.theta_refinements = std::max(worst.theta_refinements, d.theta_refinements);
    worst.theta_change = std::max(worst.theta_change, d.theta_change);
    worst.theta_nodes = std::max(worst.theta_nodes, d.theta_nodes);
  }
};

OmegaRule effective_rule(const EnergyOptions& opts) {
  OmegaRule r = opts.omega;
  if (!(r.rel_tol > 0.0)) r.rel_tol = 0.1 * opts.rel_tol;
  return r;
}

void check_options(const EnergyOptions& opts) {
  if (!(opts.rel_tol > 0.0) || !(opts.rel_tol < 1.0)) throw DomainError("rel_tol must be in (0, 1)");
  if (opts.l_max < 0) throw DomainError("l_max must be nonnegative");
}

}  // namespace

EnergyResult casimir_energy(const PhysicalGeometry& g, BoundaryCondition bc,
                            const EnergyOptions& opts) {
  check_options(opts);
  const Geometry geom = g.reduced();
  int l = opts.l_max > 0 ? opts.l_max : default_l_max(g);
  if (bc == BoundaryCondition::PerfectConductor) l = std::max(l, 1);
  const OmegaRule rule = effective_rule(opts);

  EnergyResult res;
  DiagCollector diag;
  auto run = [&](int lmax) {
    auto f = [&, lmax](double omega) {
      kernel::KernelDiagnostics d;
      const double v = logdet_at(geom, bc, omega, lmax, opts.quad, &d);
      diag.add(d);
      return v;
    };
    return integrate_omega(f, geom.gap(), rule, opts.threads);
  };

  OmegaIntegral cur = run(l);
  res.diagnostics.ladder.push_back(LadderStep{l, cur.value / kTwoPi});
  double ladder_change = 0.0;
  if (opts.ladder) {
    int steps = 0;
    while (true) {
      const OmegaIntegral next = run(l + 2);
      res.diagnostics.ladder.push_back(LadderStep{l + 2, next.value / kTwoPi});
      ladder_change = std::fabs(next.value - cur.value) / std::max(std::fabs(next.value), 1e-300);
      l += 2;
      cur = next;
      ++steps;
      if (ladder_change < opts.rel_tol) break;
      if (steps >= opts.ladder_steps) {
        const auto& lad = res.diagnostics.ladder;
        throw ConvergenceError("l_max ladder did not settle at l_max = " + std::to_string(l),
                               lad[lad.size() - 2].e_dimensionless, lad.back().e_dimensionless);
      }
    }
  }

  const double len = g.length();
  res.e_dimensionless = cur.value / kTwoPi;
  res.e_over_e0 = kTwoPi * (g.r1 / len) * res.e_dimensionless;
  res.integrand_samples = cur.samples;
  auto& dg = res.diagnostics;
  dg.l_max = l;
  dg.n_max = diag.worst.n_max;
  dg.n_tail = diag.worst.n_tail;
  dg.theta_refinements = diag.worst.theta_refinements;
  dg.theta_change = diag.worst.theta_change;
  dg.omega_nodes = static_cast<int>(cur.samples.size());
  dg.omega_panels = cur.panels;
  const double mag = std::max(std::fabs(cur.value), 1e-300);
  dg.omega_error = (cur.error - cur.tail_bound) / mag;
  dg.tail_bound = cur.tail_bound / mag;
  res.error_estimate = dg.omega_error + dg.tail_bound + dg.theta_change + dg.n_tail + ladder_change;
  return res;
}

ForceResult casimir_force(const PhysicalGeometry& g, BoundaryCondition bc,
                          const EnergyOptions& opts) {
  check_options(opts);
  const Geometry g0 = g.reduced();
  const double len0 = g.length();
  int l = opts.l_max > 0 ? opts.l_max : default_l_max(g);
  if (bc == BoundaryCondition::PerfectConductor) l = std::max(l, 1);
  const double h = 1e-3 * g.d;
  const double offsets[4] = {h, -h, 0.5 * h, -0.5 * h};
  const OmegaRule rule = effective_rule(opts);

  std::mutex mu;
  std::vector<std::pair<double, double>> coarse;  // (omega, F(h) integrand)

  // omega0 is kappa * L at the central gap
  auto integrand = [&](double omega0) {
    const kernel::ThetaPlan plan = kernel::plan_theta(g0, bc, omega0, l, opts.quad);
    kernel::QuadratureSpec q = opts.quad;
    q.fixed_theta_max = plan.theta_max;
    q.fixed_theta_panels = plan.panels;
    double vals[4];
    for (int i = 0; i < 4; ++i) {
      PhysicalGeometry gi = g;
      gi.d = g.d + offsets[i];
      const double leni = gi.length();
      vals[i] = logdet_at(gi.reduced(), bc, omega0 * leni / len0, l, q);
    }
    // -dE/dd in units of hbar c / L0^2, per unit omega0
    const double hr = h / len0;
    const double f_h = -(vals[0] - vals[1]) / (2.0 * hr) / kTwoPi;
    const double f_h2 = -(vals[2] - vals[3]) / hr / kTwoPi;
    {
      std::lock_guard<std::mutex> lock(mu);
      coarse.emplace_back(omega0, f_h);
    }
    return (4.0 * f_h2 - f_h) / 3.0;
  };
  const OmegaIntegral rich = integrate_omega(integrand, g0.gap(), rule, opts.threads);

  // F(h) over the same final nodes, for the consistency estimate
  std::sort(coarse.begin(), coarse.end());
  double f_h_total = 0.0;
  double f_rich_total = 0.0;
  for (const auto& s : rich.samples) {
    const auto key = std::make_pair(s.omega, -std::numeric_limits<double>::infinity());
    auto it = std::lower_bound(coarse.begin(), coarse.end(), key);
    if (it == coarse.end() || it->first != s.omega) continue;
    f_h_total += s.weight * it->second;
    f_rich_total += s.weight * s.value;
  }
  // F(h/2) = (3 F_rich + F(h)) / 4
  const double f_h2_total = (3.0 * f_rich_total + f_h_total) / 4.0;

  ForceResult out;
  out.f_dimensionless = rich.value;
  out.step = h / len0;
  out.richardson_error = std::fabs(f_h_total - f_h2_total) / std::max(std::fabs(rich.value), 1e-300);
  out.l_max = l;
  out.omega_nodes = static_cast<int>(rich.samples.size());
  return out;
}

}  // namespace casimir::energy
