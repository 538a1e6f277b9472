#include "casimir/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "casimir/errors.hpp"
#include "casimir/quadrature.hpp"
#include "casimir/specfun.hpp"

namespace casimir::kernel {
namespace {

using scattering::LogMagnitude;

int positive_mod2(int v) { return ((v % 2) + 2) % 2; }

int pol_index(Polarization pol) { return pol == Polarization::TM ? 1 : 0; }

Polarization pol_of(bool em, int p) {
  if (!em) return Polarization::Scalar;
  return p == 0 ? Polarization::TE : Polarization::TM;
}

// Frequency-level data shared by all theta nodes.
struct Setup {
  Geometry g;
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  double omega = 0.0;
  int L = 0;
  bool em = false;
  int channels = 1;                      // sphere polarizations and cylinder channels
  std::vector<LogMagnitude> t1[2];       // scaled sphere elements per polarization, l = 0..L
  Polarization cyl_pol[2] = {Polarization::Scalar, Polarization::Scalar};
  double cyl_sign[2] = {1.0, 1.0};
  double n_rel_tol = 1e-16;
  int n_cap = 256;
  int s_min = 2;
};

Setup make_setup(Geometry g, BoundaryCondition bc, double omega, int l_max,
                 const QuadratureSpec& quad) {
  if (!(g.a > 0.0) || !(g.b > 0.0) || !(g.a + g.b < 1.0)) {
    throw GeometryError("sphere and cylinder overlap (a + b >= 1)");
  }
  if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("frequency must be positive");
  Setup s;
  s.g = g;
  s.bc = bc;
  s.omega = omega;
  s.L = l_max;
  s.em = bc == BoundaryCondition::PerfectConductor;
  s.channels = s.em ? 2 : 1;
  s.n_rel_tol = quad.n_rel_tol;
  s.n_cap = quad.n_hard_cap;
  s.s_min = static_cast<int>(std::ceil(l_max * g.b / (1.0 - g.b))) + 2;
  for (int p = 0; p < s.channels; ++p) {
    const Polarization pol = pol_of(s.em, p);
    s.t1[p].resize(static_cast<std::size_t>(l_max + 1));
    scattering::sphere_t_scaled_sequence(bc, pol, g.a * omega, s.t1[p]);
    // cylinder: TE uses I'/K', TM uses I/K
    s.cyl_pol[p] = pol;
    if (s.em) {
      s.cyl_sign[p] = p == 0 ? -1.0 : 1.0;
    } else {
      s.cyl_sign[p] = bc == BoundaryCondition::Neumann ? -1.0 : 1.0;
    }
  }
  return s;
}

// Everything needed from one theta node.
struct NodeData {
  double c = 1.0;
  int n_max = 0;
  double n_tail = 0.0;
  std::vector<double> ln_sigma;   // m = 0..L
  std::vector<double> ptil;       // packed per m, l = m..L
  std::vector<double> qtil;
  std::vector<double> yv[4];      // [2 r + p], packed like ptil, for m >= 0
  Eigen::MatrixXd vpp[2];         // V(m, m'), m, m' >= 0
  Eigen::MatrixXd vpm[2];         // V(m, -m')
};

std::size_t legendre_offset(int L, int m) {
  // sum_{k<m} (L - k + 1)
  return static_cast<std::size_t>(m * (L + 1) - m * (m - 1) / 2);
}

void compute_node(const Setup& s, double theta, double weight, NodeData& nd) {
  const int L = s.L;
  const double t = std::sinh(theta);
  const double c = std::cosh(theta);
  const double x = s.omega * c;
  const double y = s.g.b * x;
  nd.c = c;

  // n range: grow until every m sees a negligible, decreasing last shell.
  // Shell masses are kept linear, scaled per m by the largest log component.
  std::vector<double> lnk;
  std::vector<LogMagnitude> t2[2];
  int n_try = std::min(s.n_cap, s.s_min + 40);
  int n_found = -1;
  double tail = 0.0;
  Eigen::ArrayXd ref(L + 1);
  Eigen::ArrayXd acc(L + 1);
  Eigen::ArrayXd last(L + 1);
  Eigen::ArrayXXd comp;
  Eigen::ArrayXXd mass;
  while (true) {
    lnk.assign(static_cast<std::size_t>(n_try + L + 1), 0.0);
    specfun::bessel_log_k_ladder(0.0, x, lnk);
    const int shells = n_try + 1;
    mass.setZero(shells, L + 1);
    ref.setConstant(-INFINITY);
    for (int r = 0; r < s.channels; ++r) {
      t2[r].assign(static_cast<std::size_t>(shells), LogMagnitude{});
      scattering::cylinder_t_scaled_sequence(s.bc, s.cyl_pol[r], y, t2[r]);
    }
    // two passes: column maxima, then scaled exponentials
    for (int pass = 0; pass < 2; ++pass) {
      for (int r = 0; r < s.channels; ++r) {
        for (int side = 0; side < 2; ++side) {
          comp.resize(shells, L + 1);
          for (int m = 0; m <= L; ++m) {
            for (int sh = 0; sh < shells; ++sh) {
              const int k = side == 0 ? std::abs(sh - m) : sh + m;
              comp(sh, m) = (side == 1 && sh == 0)
                                ? -INFINITY
                                : t2[r][static_cast<std::size_t>(sh)].log_abs +
                                      2.0 * lnk[static_cast<std::size_t>(k)];
            }
          }
          if (pass == 0) {
            ref = ref.max(comp.colwise().maxCoeff().transpose());
          } else {
            comp.rowwise() -= ref.transpose();
            mass += comp.max(-745.0).exp();
          }
        }
      }
    }
    acc.setZero();
    last.setConstant(INFINITY);
    for (int sh = 0; sh < shells; ++sh) {
      bool done = sh >= std::max(1, s.s_min);
      double shell_tail = 0.0;
      for (int m = 0; m <= L; ++m) {
        const double term = mass(sh, m);
        acc(m) += term;
        if (done) {
          const double rel = term / acc(m);
          if (!(rel < s.n_rel_tol) || !(term < last(m) || term == 0.0)) done = false;
          const double ratio = term / last(m);
          if (ratio < 1.0) shell_tail = std::max(shell_tail, rel * ratio / (1.0 - ratio));
        }
        last(m) = term;
      }
      if (done) {
        n_found = sh;
        tail = shell_tail;
        break;
      }
    }
    if (n_found >= 0) break;
    if (n_try >= s.n_cap) {
      throw ConvergenceError("cylinder order sum did not settle before |n| = " +
                                 std::to_string(s.n_cap),
                             0.0, static_cast<double>(n_try));
    }
    n_try = std::min(s.n_cap, 2 * n_try);
  }
  const int N = n_found;
  nd.n_max = N;
  nd.n_tail = tail;

  nd.ln_sigma.resize(static_cast<std::size_t>(L + 1));
  for (int m = 0; m <= L; ++m) nd.ln_sigma[static_cast<std::size_t>(m)] = 0.5 * (ref(m) + std::log(acc(m)));

  const int rows = 2 * N + 1;
  Eigen::ArrayXXd lkp(rows, L + 1);
  for (int r = 0; r < s.channels; ++r) {
    for (int m = 0; m <= L; ++m) {
      const double ls = nd.ln_sigma[static_cast<std::size_t>(m)];
      for (int n = -N; n <= N; ++n) {
        const double lt = t2[r][static_cast<std::size_t>(std::abs(n))].log_abs;
        lkp(n + N, m) = lnk[static_cast<std::size_t>(std::abs(n - m))] + 0.5 * lt - ls;
      }
    }
    const Eigen::MatrixXd kp = lkp.max(-745.0).exp().matrix();
    const Eigen::MatrixXd km = kp.colwise().reverse();
    nd.vpp[r].resize(L + 1, L + 1);
    nd.vpp[r].setZero();
    nd.vpp[r].selfadjointView<Eigen::Lower>().rankUpdate(kp.transpose(), s.cyl_sign[r]);
    nd.vpp[r] = Eigen::MatrixXd(nd.vpp[r].selfadjointView<Eigen::Lower>());
    nd.vpm[r].noalias() = s.cyl_sign[r] * (kp.transpose() * km);
  }

  const std::size_t total = legendre_offset(L, L + 1);
  nd.ptil.resize(total);
  nd.qtil.resize(total);
  for (int m = 0; m <= L; ++m) {
    const std::size_t off = legendre_offset(L, m);
    const auto len = static_cast<std::size_t>(L - m + 1);
    specfun::normalized_rotated_legendre(m, L, t, std::span<double>(nd.ptil.data() + off, len),
                                         std::span<double>(nd.qtil.data() + off, len));
  }

  const double lc = std::log(c);
  const double common = s.g.a * s.omega - (1.0 - s.g.b) * x + 0.5 * std::log(0.5 * weight * c);
  Eigen::ArrayXd lv(static_cast<Eigen::Index>(total));
  Eigen::ArrayXd gv(static_cast<Eigen::Index>(total));
  for (int p = 0; p < s.channels; ++p) {
    for (int r = 0; r < s.channels; ++r) {
      for (int m = 0; m <= L; ++m) {
        const std::size_t off = legendre_offset(L, m);
        for (int l = m; l <= L; ++l) {
          const std::size_t idx = off + static_cast<std::size_t>(l - m);
          const auto e = static_cast<Eigen::Index>(idx);
          const LogMagnitude& tl = s.t1[p][static_cast<std::size_t>(l)];
          double g = 0.0;
          double ln = 0.5 * tl.log_abs + common + l * lc + nd.ln_sigma[static_cast<std::size_t>(m)];
          if (!s.em) {
            g = nd.ptil[idx];
          } else {
            if (p == r) {
              g = p == 0 ? nd.qtil[idx] : -nd.qtil[idx];
            } else {
              g = m * nd.ptil[idx] / c;
            }
            ln -= 0.5 * std::log(static_cast<double>(l) * (l + 1.0));
          }
          if (tl.sign == 0.0 || g == 0.0) {
            lv(e) = -INFINITY;
            gv(e) = 0.0;
          } else {
            lv(e) = ln + std::log(std::fabs(g));
            gv(e) = g > 0.0 ? 1.0 : -1.0;
          }
        }
      }
      const Eigen::ArrayXd vals = gv * lv.max(-745.0).exp();
      nd.yv[2 * r + p].assign(vals.data(), vals.data() + vals.size());
    }
  }
}

struct Row {
  int l = 0;
  int m = 0;  // signed in full layouts, >= 0 in sector layouts
  int p = 0;
  double wt = 1.0;
};

// Rows grouped by m (contiguous), with group boundaries.
struct Layout {
  std::vector<Row> rows;
  std::vector<int> group_start;  // size groups + 1
  bool sector = false;
  int sigma = 1;
};

void finish_groups(Layout& lay) {
  lay.group_start.clear();
  for (std::size_t i = 0; i < lay.rows.size(); ++i) {
    if (i == 0 || lay.rows[i].m != lay.rows[i - 1].m) lay.group_start.push_back(static_cast<int>(i));
  }
  lay.group_start.push_back(static_cast<int>(lay.rows.size()));
}

// Y value for row i, cylinder channel r, read from the per-node table.
double row_value(const Setup& s, const NodeData& nd, const Row& row, int r) {
  const int am = std::abs(row.m);
  const std::size_t idx = legendre_offset(s.L, am) + static_cast<std::size_t>(row.l - am);
  const double v = nd.yv[2 * r + row.p][idx];
  return (s.em && row.p != r && row.m < 0) ? -row.wt * v : row.wt * v;
}

double w_value(const NodeData& nd, const Layout& lay, const Setup& s, int r, int m, int mp) {
  const int am = std::abs(m);
  const int amp = std::abs(mp);
  if (lay.sector) {
    const double sr = (s.em && r == 1) ? -1.0 : 1.0;
    return nd.vpp[r](am, amp) + lay.sigma * sr * nd.vpm[r](am, amp);
  }
  const bool same = (m >= 0 && mp >= 0) || (m <= 0 && mp <= 0);
  return same ? nd.vpp[r](am, amp) : nd.vpm[r](am, amp);
}

// Row signs that turn the symmetric accumulation into the balanced matrix.
double row_sign(const Setup& s, const Row& row) {
  const double sg = s.t1[row.p][static_cast<std::size_t>(row.l)].sign;
  return s.em ? -sg : sg;
}

struct ThetaRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // include the fold factor
  double theta_max = 0.0;
  int panels = 0;
};

ThetaRule make_rule(double theta_max, int panels, int order, bool mirrored) {
  ThetaRule r;
  r.theta_max = theta_max;
  r.panels = panels;
  if (mirrored) {
    const auto q = quadrature::composite_gauss_legendre(-theta_max, theta_max, 2 * panels, order);
    r.nodes = q.nodes;
    r.weights = q.weights;
  } else {
    const auto q = quadrature::composite_gauss_legendre(0.0, theta_max, panels, order);
    r.nodes = q.nodes;
    r.weights = q.weights;
    for (double& w : r.weights) w *= 2.0;
  }
  return r;
}

constexpr int kChunk = 64;

// Accumulates the symmetric part S of the balanced matrix for each layout; theta nodes are
// evaluated once and shared by all layouts.
std::vector<Eigen::MatrixXd> accumulate(const Setup& s, const std::vector<Layout>& lays,
                                        const ThetaRule& rule, KernelDiagnostics& diag) {
  std::vector<Eigen::MatrixXd> out;
  for (const Layout& lay : lays) {
    const auto nrows = static_cast<Eigen::Index>(lay.rows.size());
    out.push_back(Eigen::MatrixXd::Zero(nrows, nrows));
  }
  const int nodes = static_cast<int>(rule.nodes.size());
  std::vector<NodeData> nd(kChunk);
  Eigen::MatrixXd Y[2];
  Eigen::MatrixXd Z;
  for (int start = 0; start < nodes; start += kChunk) {
    const int cnt = std::min(kChunk, nodes - start);
    for (int k = 0; k < cnt; ++k) {
      compute_node(s, rule.nodes[static_cast<std::size_t>(start + k)],
                   rule.weights[static_cast<std::size_t>(start + k)], nd[static_cast<std::size_t>(k)]);
      diag.n_max = std::max(diag.n_max, nd[static_cast<std::size_t>(k)].n_max);
      diag.n_tail = std::max(diag.n_tail, nd[static_cast<std::size_t>(k)].n_tail);
    }
    for (std::size_t li = 0; li < lays.size(); ++li) {
      const Layout& lay = lays[li];
      Eigen::MatrixXd& S = out[li];
      const int nrows = static_cast<int>(lay.rows.size());
      if (nrows == 0) continue;
      for (int r = 0; r < s.channels; ++r) {
        Y[r].resize(nrows, cnt);
        for (int k = 0; k < cnt; ++k) {
          for (int i = 0; i < nrows; ++i) {
            Y[r](i, k) = row_value(s, nd[static_cast<std::size_t>(k)], lay.rows[static_cast<std::size_t>(i)], r);
          }
        }
      }
      const int groups = static_cast<int>(lay.group_start.size()) - 1;
      for (int gi = 0; gi < groups; ++gi) {
        const int gs = lay.group_start[static_cast<std::size_t>(gi)];
        const int ge = lay.group_start[static_cast<std::size_t>(gi + 1)];
        const int mg = lay.rows[static_cast<std::size_t>(gs)].m;
        const int ncols = nrows - gs;
        for (int r = 0; r < s.channels; ++r) {
          Z.resize(ncols, cnt);
          for (int k = 0; k < cnt; ++k) {
            const NodeData& d = nd[static_cast<std::size_t>(k)];
            for (int hj = gi; hj < groups; ++hj) {
              const int hs = lay.group_start[static_cast<std::size_t>(hj)];
              const int he = lay.group_start[static_cast<std::size_t>(hj + 1)];
              const double w = w_value(d, lay, s, r, mg, lay.rows[static_cast<std::size_t>(hs)].m);
              for (int i = hs; i < he; ++i) Z(i - gs, k) = w * Y[r](i, k);
            }
          }
          S.block(gs, gs, ge - gs, ncols).noalias() += Y[r].middleRows(gs, ge - gs) * Z.transpose();
        }
      }
    }
  }
  // mirror the strictly later groups into the lower triangle
  for (std::size_t li = 0; li < lays.size(); ++li) {
    const Layout& lay = lays[li];
    Eigen::MatrixXd& S = out[li];
    const int nrows = static_cast<int>(lay.rows.size());
    const int groups = static_cast<int>(lay.group_start.size()) - 1;
    for (int gi = 0; gi < groups; ++gi) {
      const int gs = lay.group_start[static_cast<std::size_t>(gi)];
      const int ge = lay.group_start[static_cast<std::size_t>(gi + 1)];
      if (ge < nrows) S.block(ge, gs, nrows - ge, ge - gs) = S.block(gs, ge, ge - gs, nrows - ge).transpose();
    }
  }
  return out;
}

// Sum of |diagonal| and the diagonal itself over rows (l, m >= 0, p).
Eigen::VectorXd diagonal_probe(const Setup& s, const ThetaRule& rule, KernelDiagnostics& diag) {
  std::vector<Row> rows;
  for (int m = 0; m <= s.L; ++m) {
    for (int l = std::max(m, s.em ? 1 : 0); l <= s.L; ++l) {
      for (int p = 0; p < s.channels; ++p) rows.push_back(Row{l, m, p, 1.0});
    }
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
  NodeData nd;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    compute_node(s, rule.nodes[k], rule.weights[k], nd);
    diag.n_max = std::max(diag.n_max, nd.n_max);
    diag.n_tail = std::max(diag.n_tail, nd.n_tail);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double acc = 0.0;
      for (int r = 0; r < s.channels; ++r) {
        const double yv = row_value(s, nd, rows[i], r);
        acc += yv * yv * nd.vpp[r](rows[i].m, rows[i].m);
      }
      out(static_cast<Eigen::Index>(i)) += acc;
    }
  }
  return out;
}

ThetaRule select_rule(const Setup& s, const QuadratureSpec& quad, KernelDiagnostics& diag) {
  const bool mirrored = quad.integrate_cross_parity;
  if (quad.fixed_theta_max > 0.0 && quad.fixed_theta_panels > 0) {
    ThetaRule r = make_rule(quad.fixed_theta_max, quad.fixed_theta_panels, quad.theta_order, mirrored);
    diag.theta_max = r.theta_max;
    diag.theta_panels = r.panels;
    diag.theta_nodes = static_cast<int>(r.nodes.size());
    return r;
  }
  const double tmax = theta_cutoff(s.g, s.omega, s.L, quad.theta_cutoff_epsilon);
  int panels = std::max(2, static_cast<int>(std::ceil(tmax / quad.theta_panel_width)));
  ThetaRule coarse = make_rule(tmax, panels, quad.theta_order, false);
  Eigen::VectorXd d0 = diagonal_probe(s, coarse, diag);
  double change = INFINITY;
  int refinements = 0;
  while (refinements < quad.theta_max_refinements) {
    ThetaRule fine = make_rule(tmax, 2 * panels, quad.theta_order, false);
    Eigen::VectorXd d1 = diagonal_probe(s, fine, diag);
    const double scale = d1.cwiseAbs().sum();
    change = scale > 0.0 ? (d1 - d0).cwiseAbs().sum() / scale : 0.0;
    ++refinements;
    if (change <= quad.theta_rel_tol) break;
    panels *= 2;
    d0 = std::move(d1);
  }
  if (change > quad.theta_rel_tol) {
    throw ConvergenceError("theta quadrature did not settle", 0.0, change);
  }
  ThetaRule r = make_rule(tmax, panels, quad.theta_order, mirrored);
  diag.theta_max = tmax;
  diag.theta_panels = panels;
  diag.theta_nodes = static_cast<int>(r.nodes.size());
  diag.theta_refinements = refinements;
  diag.theta_change = change;
  return r;
}

RoundTripMatrix assemble_full(Geometry geom, BoundaryCondition bc, double omega,
                              const ModeBasis& basis, const QuadratureSpec& quad, KernelForm form) {
  const Setup s = make_setup(geom, bc, omega, basis.l_max, quad);
  RoundTripMatrix out;
  out.omega = omega;
  out.a = geom.a;
  out.b = geom.b;
  out.basis = basis;
  out.form = form;
  const ThetaRule rule = select_rule(s, quad, out.diagnostics);

  Layout lay;
  std::vector<std::size_t> order(basis.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return basis.entries[x].m < basis.entries[y].m;
  });
  for (std::size_t i : order) {
    const ModeEntry& e = basis.entries[i];
    lay.rows.push_back(Row{e.l, e.m, pol_index(e.pol), 1.0});
  }
  finish_groups(lay);
  const Eigen::MatrixXd S = std::move(accumulate(s, {lay}, rule, out.diagnostics)[0]);

  const auto n = static_cast<Eigen::Index>(basis.size());
  out.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ModeEntry& ei = basis.entries[order[static_cast<std::size_t>(i)]];
    const double sg = row_sign(s, lay.rows[static_cast<std::size_t>(i)]);
    const LogMagnitude& ti = s.t1[pol_index(ei.pol)][static_cast<std::size_t>(ei.l)];
    for (Eigen::Index k = 0; k < n; ++k) {
      const ModeEntry& ek = basis.entries[order[static_cast<std::size_t>(k)]];
      const auto oi = static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]);
      const auto ok = static_cast<Eigen::Index>(order[static_cast<std::size_t>(k)]);
      if (!quad.integrate_cross_parity &&
          basis.parity_class[static_cast<std::size_t>(oi)] != basis.parity_class[static_cast<std::size_t>(ok)]) {
        out.values(oi, ok) = 0.0;
        continue;
      }
      double v = sg * S(i, k);
      if (form == KernelForm::Plain && v != 0.0) {
        const LogMagnitude& tk = s.t1[pol_index(ek.pol)][static_cast<std::size_t>(ek.l)];
        v *= std::exp(0.5 * (ti.log_abs - tk.log_abs));
      }
      out.values(oi, ok) = v;
    }
  }
  return out;
}

}  // namespace

Geometry make_geometry(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw GeometryError("radii must be positive");
  }
  if (!(a + b < 1.0)) throw GeometryError("sphere and cylinder overlap (a + b >= 1)");
  return Geometry{a, b};
}

Geometry PhysicalGeometry::reduced() const {
  if (!(r1 > 0.0) || !(r2 > 0.0) || !std::isfinite(r1) || !std::isfinite(r2)) {
    throw GeometryError("radii must be positive and finite");
  }
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw GeometryError("the surface gap must be positive (bodies touch or overlap)");
  }
  const double len = length();
  return make_geometry(r1 / len, r2 / len);
}

ModeBasis ModeBasis::build(BoundaryCondition bc, int l_max) {
  const bool em = bc == BoundaryCondition::PerfectConductor;
  if (l_max < (em ? 1 : 0)) throw DomainError("l_max below the lowest sphere channel");
  ModeBasis mb;
  mb.bc = bc;
  mb.l_max = l_max;
  for (int l = em ? 1 : 0; l <= l_max; ++l) {
    for (int m = -l; m <= l; ++m) {
      if (em) {
        mb.entries.push_back(ModeEntry{l, m, Polarization::TE});
        mb.parity_class.push_back(positive_mod2(l - m));
        mb.entries.push_back(ModeEntry{l, m, Polarization::TM});
        mb.parity_class.push_back(positive_mod2(l - m + 1));
      } else {
        mb.entries.push_back(ModeEntry{l, m, Polarization::Scalar});
        mb.parity_class.push_back(positive_mod2(l - m));
      }
    }
  }
  return mb;
}

std::ptrdiff_t ModeBasis::index_of(int l, int m, Polarization pol) const {
  const bool em = is_em();
  if (em != (pol != Polarization::Scalar)) return -1;
  if (l < (em ? 1 : 0) || l > l_max || m < -l || m > l) return -1;
  const int first = em ? 1 : 0;
  const std::ptrdiff_t before = static_cast<std::ptrdiff_t>(l) * l - static_cast<std::ptrdiff_t>(first) * first;
  const std::ptrdiff_t pos = before + (m + l);
  return em ? 2 * pos + pol_index(pol) : pos;
}

double theta_cutoff(Geometry geom, double omega, int l_max, double epsilon) {
  const double k = 2.0 * l_max + 2.0;
  const double alpha = 2.0 * omega * (1.0 - geom.b);
  const double cpk = std::max(1.0, k / alpha);
  auto f = [&](double c) { return k * std::log(c) - alpha * c; };
  const double target = f(cpk) + std::log(epsilon);
  double lo = cpk;
  double hi = cpk * 2.0 + 1.0;
  while (f(hi) > target) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::acosh(hi);
}

RoundTripMatrix assemble_scalar_matrix(Geometry geom, BoundaryCondition bc, double omega,
                                       const ModeBasis& basis, const QuadratureSpec& quad,
                                       KernelForm form) {
  if (bc == BoundaryCondition::PerfectConductor || basis.bc != bc) {
    throw DomainError("scalar assembly needs a Dirichlet or Neumann basis");
  }
  return assemble_full(geom, bc, omega, basis, quad, form);
}

RoundTripMatrix assemble_em_matrix(Geometry geom, double omega, const ModeBasis& basis,
                                   const QuadratureSpec& quad, KernelForm form) {
  if (!basis.is_em()) throw DomainError("electromagnetic assembly needs a perfect-conductor basis");
  return assemble_full(geom, BoundaryCondition::PerfectConductor, omega, basis, quad, form);
}

RoundTripMatrix assemble_matrix(Geometry geom, double omega, const ModeBasis& basis,
                                const QuadratureSpec& quad, KernelForm form) {
  if (basis.is_em()) return assemble_em_matrix(geom, omega, basis, quad, form);
  return assemble_scalar_matrix(geom, basis.bc, omega, basis, quad, form);
}

ThetaPlan plan_theta(Geometry geom, BoundaryCondition bc, double omega, int l_max,
                     const QuadratureSpec& quad) {
  QuadratureSpec q = quad;
  q.integrate_cross_parity = false;
  q.fixed_theta_max = 0.0;
  q.fixed_theta_panels = 0;
  const Setup s = make_setup(geom, bc, omega, l_max, q);
  KernelDiagnostics diag;
  const ThetaRule rule = select_rule(s, q, diag);
  return ThetaPlan{rule.theta_max, rule.panels, diag.theta_refinements, diag.theta_change};
}

SectorBlocks assemble_sector_blocks(Geometry geom, BoundaryCondition bc, double omega, int l_max,
                                    const QuadratureSpec& quad) {
  QuadratureSpec q = quad;
  q.integrate_cross_parity = false;
  const Setup s = make_setup(geom, bc, omega, l_max, q);
  SectorBlocks out;
  const ThetaRule rule = select_rule(s, q, out.diagnostics);
  std::vector<Layout> lays;
  for (int sigma : {1, -1}) {
    for (int cls = 0; cls < 2; ++cls) {
      Layout lay;
      lay.sector = true;
      lay.sigma = sigma;
      for (int m = 0; m <= l_max; ++m) {
        for (int l = std::max(m, s.em ? 1 : 0); l <= l_max; ++l) {
          for (int p = 0; p < s.channels; ++p) {
            if (positive_mod2(l - m + p) != cls) continue;
            if (m == 0 && (p == 0 ? 1 : -1) != sigma) continue;
            lay.rows.push_back(Row{l, m, p, m == 0 ? std::sqrt(0.5) : 1.0});
          }
        }
      }
      if (lay.rows.empty()) continue;
      finish_groups(lay);
      lays.push_back(std::move(lay));
    }
  }
  std::vector<Eigen::MatrixXd> mats = accumulate(s, lays, rule, out.diagnostics);
  for (std::size_t li = 0; li < lays.size(); ++li) {
    Eigen::MatrixXd& S = mats[li];
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
      S.row(i) *= row_sign(s, lays[li].rows[static_cast<std::size_t>(i)]);
    }
    out.blocks.push_back(std::move(S));
    out.symmetric.push_back(!s.em);
  }
  return out;
}

NSumResult n_sum_terms(BoundaryCondition bc, Polarization pol, int m, int mp, double x, double y,
                       double rel_tol, int hard_cap) {
  if (!(x > 0.0) || !(y > 0.0)) throw DomainError("n_sum_terms needs positive arguments");
  const int reach = std::max(std::abs(m), std::abs(mp));
  std::vector<double> lnk(static_cast<std::size_t>(hard_cap + reach + 2));
  specfun::bessel_log_k_ladder(0.0, x, lnk);
  std::vector<LogMagnitude> t2(static_cast<std::size_t>(hard_cap + 1));
  scattering::cylinder_t_scaled_sequence(bc, pol, y, t2);
  auto term = [&](int n) {
    const LogMagnitude& t = t2[static_cast<std::size_t>(std::abs(n))];
    return t.sign * std::exp(lnk[static_cast<std::size_t>(std::abs(n - m))] +
                             lnk[static_cast<std::size_t>(std::abs(n - mp))] + t.log_abs);
  };
  quadrature::CompensatedSum sum;
  double mass = 0.0;
  double prev_shell = INFINITY;
  for (int sh = 0; sh <= hard_cap; ++sh) {
    const double v = sh == 0 ? term(0) : term(sh) + term(-sh);
    const double a = sh == 0 ? std::fabs(v) : std::fabs(term(sh)) + std::fabs(term(-sh));
    sum.add(v);
    mass += a;
    if (sh > reach && a <= rel_tol * mass && a < prev_shell) {
      const double ratio = a / prev_shell;
      return NSumResult{sum.value(), sh, (a / mass) * ratio / (1.0 - ratio)};
    }
    prev_shell = a;
  }
  throw ConvergenceError("cylinder order sum did not settle before |n| = " + std::to_string(hard_cap),
                         0.0, sum.value());
}

double n_sum_partial(BoundaryCondition bc, Polarization pol, int m, int mp, double x, double y,
                     int n_max) {
  if (!(x > 0.0) || !(y > 0.0)) throw DomainError("n_sum_partial needs positive arguments");
  const int reach = std::max(std::abs(m), std::abs(mp));
  std::vector<double> lnk(static_cast<std::size_t>(n_max + reach + 2));
  specfun::bessel_log_k_ladder(0.0, x, lnk);
  std::vector<LogMagnitude> t2(static_cast<std::size_t>(n_max + 1));
  scattering::cylinder_t_scaled_sequence(bc, pol, y, t2);
  quadrature::CompensatedSum sum;
  for (int n = -n_max; n <= n_max; ++n) {
    const LogMagnitude& t = t2[static_cast<std::size_t>(std::abs(n))];
    sum.add(t.sign * std::exp(lnk[static_cast<std::size_t>(std::abs(n - m))] +
                              lnk[static_cast<std::size_t>(std::abs(n - mp))] + t.log_abs));
  }
  return sum.value();
}

void write_matrix_csv(const RoundTripMatrix& m, std::ostream& out) {
  out << "row_l,row_m,row_pol,col_l,col_m,col_pol,value\n";
  const auto& e = m.basis.entries;
  const auto prec = out.precision(17);
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (std::size_t k = 0; k < e.size(); ++k) {
      out << e[i].l << ',' << e[i].m << ',' << scattering::to_string(e[i].pol) << ',' << e[k].l
          << ',' << e[k].m << ',' << scattering::to_string(e[k].pol) << ','
          << m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) << '\n';
    }
  }
  out.precision(prec);
}

}  // namespace casimir::kernel
