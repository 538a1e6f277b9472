#include "casimir/cli.hpp"

#include <CLI11.hpp>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <json.hpp>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "casimir/asymptotics.hpp"
#include "casimir/energy.hpp"
#include "casimir/errors.hpp"
#include "casimir/specfun.hpp"

namespace casimir::cli {
namespace {

using json = nlohmann::ordered_json;
using scattering::BoundaryCondition;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string to_string(Command c) {
  switch (c) {
    case Command::Energy: return "energy";
    case Command::Force: return "force";
    case Command::Sweep: return "sweep";
    case Command::Asympt: return "asympt";
    case Command::Validate: return "validate";
  }
  return "unknown";
}

json config_json(const RunConfig& cfg) {
  json j;
  j["command"] = to_string(cfg.command);
  j["bc"] = scattering::to_string(cfg.bc);
  j["r1"] = cfg.r1;
  j["r2"] = cfg.r2;
  j["d"] = cfg.d ? json(*cfg.d) : json(nullptr);
  j["d_over_r"] = cfg.d_over_r ? json(*cfg.d_over_r) : json(nullptr);
  j["lmax"] = cfg.l_max;
  j["nmax"] = cfg.n_max;
  j["rel_tol"] = cfg.rel_tol;
  if (cfg.command == Command::Sweep) {
    j["from"] = cfg.sweep_from;
    j["to"] = cfg.sweep_to;
    j["points"] = cfg.sweep_points;
  }
  return j;
}

// A table rendered either as CSV (header plus rows) or as the JSON document.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
  json diagnostics = json::object();

  void write(const RunConfig& cfg, std::ostream& out) const {
    if (cfg.format == Format::Csv) {
      for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
      out << '\n';
      for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
          out << (i ? "," : "");
          const json& v = row[i];
          if (v.is_null()) {
            out << "nan";
          } else if (v.is_number_float()) {
            out << num(v.get<double>());
          } else if (v.is_string()) {
            out << v.get<std::string>();
          } else {
            out << v.dump();
          }
        }
        out << '\n';
      }
      return;
    }
    json doc;
    doc["config"] = config_json(cfg);
    json arr = json::array();
    for (const auto& row : rows) {
      json r;
      for (std::size_t i = 0; i < columns.size(); ++i) r[columns[i]] = row[i];
      arr.push_back(std::move(r));
    }
    doc["rows"] = std::move(arr);
    doc["diagnostics"] = diagnostics;
    doc["version"] = kVersion;
    out << doc.dump(2) << '\n';
  }
};

energy::EnergyOptions energy_options(const RunConfig& cfg) {
  energy::EnergyOptions o;
  o.l_max = cfg.l_max;
  o.rel_tol = cfg.rel_tol;
  o.quad.n_hard_cap = cfg.n_max;
  o.threads = cfg.threads;
  return o;
}

kernel::PhysicalGeometry physical(const RunConfig& cfg, double d) {
  return kernel::PhysicalGeometry{cfg.r1, cfg.r2, d};
}

json ladder_json(const energy::EnergyDiagnostics& dg) {
  json lad = json::array();
  for (const auto& s : dg.ladder) lad.push_back({{"l_max", s.l_max}, {"e", s.e_dimensionless}});
  return lad;
}

json energy_diag_json(const energy::EnergyResult& e) {
  const auto& dg = e.diagnostics;
  json j;
  j["l_max"] = dg.l_max;
  j["n_max"] = dg.n_max;
  j["n_tail"] = dg.n_tail;
  j["theta_refinements"] = dg.theta_refinements;
  j["theta_change"] = dg.theta_change;
  j["omega_nodes"] = dg.omega_nodes;
  j["omega_panels"] = dg.omega_panels;
  j["omega_error"] = dg.omega_error;
  j["tail_bound"] = dg.tail_bound;
  j["ladder"] = ladder_json(dg);
  return j;
}

// Runs body and maps library exceptions onto exit codes.
int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const GeometryError& e) {
    err << "geometry error: " << e.what() << '\n';
    return kGeometry;
  } catch (const ConvergenceError& e) {
    err << "convergence error: " << e.what() << " (previous " << num(e.previous()) << ", last "
        << num(e.last()) << ")\n";
    return kConvergence;
  } catch (const SpectralRadiusError& e) {
    err << "convergence error: " << e.what() << '\n';
    return kConvergence;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << '\n';
    return kGeometry;
  }
}

std::vector<double> sweep_grid(const RunConfig& cfg) {
  std::vector<double> xs;
  const int n = cfg.sweep_points;
  if (n == 1) return {cfg.sweep_from};
  const double l0 = std::log10(cfg.sweep_from);
  const double l1 = std::log10(cfg.sweep_to);
  for (int i = 0; i < n; ++i) {
    if (i == 0) {
      xs.push_back(cfg.sweep_from);
    } else if (i == n - 1) {
      xs.push_back(cfg.sweep_to);
    } else {
      xs.push_back(std::pow(10.0, l0 + (l1 - l0) * i / (n - 1)));
    }
  }
  return xs;
}

struct SweepRow {
  double d_over_r = 0.0;
  double e_over_e0 = NAN;
  double asympt_over_e0 = NAN;
  double ratio = NAN;
  std::string status = "ok";
  json diagnostics;
};

SweepRow sweep_row(const RunConfig& cfg, double d_over_r) {
  SweepRow row;
  row.d_over_r = d_over_r;
  const double d = d_over_r * cfg.r1;
  const kernel::PhysicalGeometry g = physical(cfg, d);
  try {
    energy::EnergyOptions o = energy_options(cfg);
    o.threads = 1;
    const energy::EnergyResult e = energy::casimir_energy(g, cfg.bc, o);
    const double far = asymptotics::far_energy(cfg.bc, asymptotics::Family::SphereCylinder,
                                               cfg.r1, cfg.r2, g.length());
    row.e_over_e0 = e.e_over_e0;
    row.asympt_over_e0 = kTwoPi * cfg.r1 * far;
    row.ratio = row.e_over_e0 / row.asympt_over_e0;
    row.diagnostics = energy_diag_json(e);
    row.diagnostics["error_estimate"] = e.error_estimate;
  } catch (const ConvergenceError& e) {
    row.status = "convergence_error";
    row.diagnostics = {{"error", e.what()}};
  } catch (const SpectralRadiusError& e) {
    row.status = "spectral_radius_error";
    row.diagnostics = {{"error", e.what()}};
  } catch (const DomainError& e) {
    row.status = "domain_error";
    row.diagnostics = {{"error", e.what()}};
  }
  return row;
}

struct Check {
  std::string name;
  double observed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;  ///< relative, or absolute when expected is zero
  bool pass = false;
};

Check relative_check(std::string name, double observed, double expected, double tol) {
  const double scale = expected == 0.0 ? 1.0 : std::fabs(expected);
  const bool ok = std::isfinite(observed) && std::fabs(observed - expected) <= tol * scale;
  return Check{std::move(name), observed, expected, tol, ok};
}

}  // namespace

double RunConfig::gap() const {
  if (d) return *d;
  if (d_over_r) return *d_over_r * r1;
  return 0.0;
}

int run_energy(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const kernel::PhysicalGeometry g = physical(cfg, cfg.gap());
        const energy::EnergyResult e = energy::casimir_energy(g, cfg.bc, energy_options(cfg));
        Table t;
        t.columns = {"d_over_R", "E_L_over_hbar_c", "E_over_E0", "error_estimate", "l_max",
                     "n_max", "theta_refinements", "omega_nodes"};
        const auto& dg = e.diagnostics;
        t.rows.push_back({g.d / g.r1, e.e_dimensionless, e.e_over_e0, e.error_estimate, dg.l_max,
                          dg.n_max, dg.theta_refinements, dg.omega_nodes});
        t.diagnostics = energy_diag_json(e);
        t.write(cfg, out);
        return static_cast<int>(kOk);
      },
      err);
}

int run_force(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const kernel::PhysicalGeometry g = physical(cfg, cfg.gap());
        const energy::ForceResult f = energy::casimir_force(g, cfg.bc, energy_options(cfg));
        const double len = g.length();
        const double pfa = asymptotics::pfa_force(cfg.bc, g.r1, g.r2, g.d);
        Table t;
        t.columns = {"d_over_R", "F_L2_over_hbar_c", "F_over_F_pfa", "richardson_error", "l_max",
                     "omega_nodes"};
        t.rows.push_back({g.d / g.r1, f.f_dimensionless, f.f_dimensionless / (len * len) / pfa,
                          f.richardson_error, f.l_max, f.omega_nodes});
        t.diagnostics = {{"step_over_L", f.step}, {"l_max", f.l_max},
                         {"omega_nodes", f.omega_nodes}};
        t.write(cfg, out);
        return static_cast<int>(kOk);
      },
      err);
}

int run_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        // validate the geometry up front so overlap is a geometry error, not a row status
        physical(cfg, cfg.sweep_from * cfg.r1).reduced();
        const std::vector<double> xs = sweep_grid(cfg);
        std::vector<SweepRow> rows(xs.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
          for (std::size_t i = next++; i < xs.size(); i = next++) rows[i] = sweep_row(cfg, xs[i]);
        };
        const int workers = std::max(1, std::min<int>(cfg.threads, static_cast<int>(xs.size())));
        std::vector<std::future<void>> pool;
        for (int w = 1; w < workers; ++w) pool.push_back(std::async(std::launch::async, worker));
        worker();
        for (auto& p : pool) p.get();

        Table t;
        t.columns = {"d_over_R", "E_over_E0", "E_asympt_over_E0", "ratio", "status"};
        json diag = json::array();
        bool failed = false;
        for (const auto& r : rows) {
          t.rows.push_back({r.d_over_r, num_json(r.e_over_e0), num_json(r.asympt_over_e0),
                            num_json(r.ratio), r.status});
          diag.push_back(r.diagnostics);
          if (r.status != "ok") {
            failed = true;
            err << "row d_over_R=" << num(r.d_over_r) << ": " << r.status << '\n';
          }
        }
        t.diagnostics = {{"rows", diag}};
        t.write(cfg, out);
        return static_cast<int>(failed ? kConvergence : kOk);
      },
      err);
}

int run_asympt(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const kernel::PhysicalGeometry g = physical(cfg, cfg.gap());
        g.reduced();
        const double e0 = 1.0 / (kTwoPi * g.r1);
        const double len = g.length();
        Table t;
        t.columns = {"d_over_R", "E_far_over_E0", "E_pfa_over_E0", "E_de_over_E0",
                     "F_pfa_L2_over_hbar_c"};
        t.rows.push_back(
            {g.d / g.r1,
             asymptotics::far_energy(cfg.bc, asymptotics::Family::SphereCylinder, g.r1, g.r2,
                                     len) / e0,
             asymptotics::pfa_energy(cfg.bc, g.r1, g.r2, g.d) / e0,
             asymptotics::de_energy(cfg.bc, g.r1, g.r2, g.d) / e0,
             asymptotics::pfa_force(cfg.bc, g.r1, g.r2, g.d) * len * len});
        t.diagnostics = {{"de_beta", asymptotics::de_beta(cfg.bc)},
                         {"de_alpha", asymptotics::de_alpha(cfg.bc)}};
        t.write(cfg, out);
        return static_cast<int>(kOk);
      },
      err);
}

int run_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        using asymptotics::Family;
        const double pi = std::numbers::pi;
        std::vector<Check> checks;

        for (const auto& c : asymptotics::far_integral_constants(1e-10, cfg.threads)) {
          checks.push_back(relative_check("far_integral:" + c.name, c.value, c.exact, 1e-6));
        }

        const double L = 10.0;
        checks.push_back(relative_check(
            "far_energy:sphere_cylinder_neumann_coefficient",
            -asymptotics::far_energy(BoundaryCondition::Neumann, Family::SphereCylinder, 1.0, 1.0,
                                     L) * std::pow(L, 6),
            71.0 / (45.0 * pi), 1e-12));
        checks.push_back(relative_check(
            "far_energy:sphere_sphere_pec_coefficient",
            -asymptotics::far_energy(BoundaryCondition::PerfectConductor, Family::SphereSphere,
                                     1.0, 1.0, L) * std::pow(L, 7),
            143.0 / (16.0 * pi), 1e-12));
        checks.push_back(relative_check(
            "pfa:pec_over_dirichlet",
            asymptotics::pfa_energy(BoundaryCondition::PerfectConductor, 1.0, 1.0, 0.1) /
                asymptotics::pfa_energy(BoundaryCondition::Dirichlet, 1.0, 1.0, 0.1),
            2.0, 1e-15));
        checks.push_back(relative_check("de_beta:neumann",
                                        asymptotics::de_beta(BoundaryCondition::Neumann),
                                        2.0 / 3.0 * (1.0 - 30.0 / (pi * pi)), 1e-14));
        checks.push_back(relative_check(
            "de_bracket:dirichlet_d_0.01R",
            asymptotics::de_bracket(BoundaryCondition::Dirichlet, 1.0, 1.0, 0.01), 1.003125,
            1e-12));

        for (double nu : {0.5, 10.5, 40.0}) {
          for (double z : {1e-3, 1.0, 50.0}) {
            const auto p = specfun::bessel_ik_scaled(nu, z);
            const double w = z * (p.i_scaled * p.dk_scaled - p.di_scaled * p.k_scaled);
            checks.push_back(
                relative_check("wronskian:nu=" + num(nu) + ",z=" + num(z), w, -1.0, 1e-12));
          }
        }

        // exact pipeline at desk scale: energies negative, near the far-field law at large d
        for (BoundaryCondition bc : {BoundaryCondition::Dirichlet, BoundaryCondition::Neumann}) {
          RunConfig c = cfg;
          c.bc = bc;
          const kernel::PhysicalGeometry g{1.0, 1.0, 30.0};
          energy::EnergyOptions o = energy_options(c);
          o.l_max = 4;
          const energy::EnergyResult e = energy::casimir_energy(g, bc, o);
          Check neg{"energy_negative:" + scattering::to_string(bc) + ",d/R=30", e.e_over_e0, 0.0,
                    0.0, e.e_over_e0 < 0.0};
          checks.push_back(neg);
        }

        Table t;
        t.columns = {"check", "observed", "expected", "tolerance", "status"};
        bool all = true;
        for (const auto& c : checks) {
          t.rows.push_back({c.name, c.observed, c.expected, c.tolerance, c.pass ? "pass" : "fail"});
          if (!c.pass) {
            all = false;
            err << "FAIL " << c.name << ": observed " << num(c.observed) << ", expected "
                << num(c.expected) << '\n';
          }
        }
        t.diagnostics = {{"checks", checks.size()}, {"all_passed", all}};
        t.write(cfg, out);
        return static_cast<int>(all ? kOk : kValidationFailed);
      },
      err);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Casimir interaction between a sphere and a cylinder", "casimir-sc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  RunConfig cfg;
  double d = 0.0;
  double d_over_r = 0.0;
  std::string format = "csv";
  const std::map<std::string, BoundaryCondition> bc_map = {
      {"dirichlet", BoundaryCondition::Dirichlet},
      {"neumann", BoundaryCondition::Neumann},
      {"pec", BoundaryCondition::PerfectConductor}};
  cfg.threads = std::max(1u, std::thread::hardware_concurrency());

  struct Sub {
    Command cmd;
    CLI::App* app;
    CLI::Option* d = nullptr;
    CLI::Option* dr = nullptr;
  };
  std::vector<Sub> subs;
  auto add = [&](Command cmd, const std::string& name, const std::string& help) {
    CLI::App* sc = app.add_subcommand(name, help);
    Sub s{cmd, sc};
    sc->add_option("--bc", cfg.bc, "boundary condition: dirichlet, neumann or pec")
        ->transform(CLI::CheckedTransformer(bc_map, CLI::ignore_case));
    sc->add_option("--r1", cfg.r1, "sphere radius");
    sc->add_option("--r2", cfg.r2, "cylinder radius");
    if (cmd != Command::Sweep && cmd != Command::Validate) {
      s.d = sc->add_option("--d", d, "surface gap");
      s.dr = sc->add_option("--d-over-r", d_over_r, "surface gap in units of the sphere radius");
      s.d->excludes(s.dr);
    }
    sc->add_option("--lmax", cfg.l_max, "starting l_max of the truncation ladder (0: heuristic)")
        ->check(CLI::NonNegativeNumber);
    sc->add_option("--nmax", cfg.n_max, "hard cap on the cylinder order |n|")
        ->check(CLI::PositiveNumber);
    sc->add_option("--rel-tol", cfg.rel_tol, "relative tolerance, in (1e-12, 1e-1)");
    sc->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));
    sc->add_option("--out", cfg.out, "output file (default: standard output)");
    sc->add_option("--threads", cfg.threads, "worker threads")->check(CLI::PositiveNumber);
    if (cmd == Command::Sweep) {
      sc->add_option("--from", cfg.sweep_from, "smallest d/R")->check(CLI::PositiveNumber);
      sc->add_option("--to", cfg.sweep_to, "largest d/R")->check(CLI::PositiveNumber);
      sc->add_option("--points", cfg.sweep_points, "number of log-spaced points")
          ->check(CLI::PositiveNumber);
    }
    subs.push_back(s);
  };
  cfg.sweep_points = 11;
  add(Command::Energy, "energy", "Casimir energy at one separation");
  add(Command::Force, "force", "Casimir force at one separation");
  add(Command::Sweep, "sweep", "energy against the far-field law over a d/R range");
  add(Command::Asympt, "asympt", "closed-form asymptotic energies at one separation");
  add(Command::Validate, "validate", "built-in validation checks");

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  const Sub* active = nullptr;
  for (const auto& s : subs) {
    if (s.app->parsed()) active = &s;
  }
  if (active == nullptr) {
    err << "usage error: a subcommand is required\n";
    return kUsage;
  }
  cfg.command = active->cmd;
  cfg.format = format == "json" ? Format::Json : Format::Csv;
  if (!(cfg.rel_tol > 1e-12 && cfg.rel_tol < 1e-1)) {
    err << "usage error: --rel-tol must lie in (1e-12, 1e-1)\n";
    return kUsage;
  }
  if (active->d != nullptr) {
    const bool has_d = active->d->count() > 0;
    const bool has_dr = active->dr->count() > 0;
    if (has_d == has_dr) {
      err << "usage error: give exactly one of --d and --d-over-r\n";
      return kUsage;
    }
    if (has_d) cfg.d = d;
    if (has_dr) cfg.d_over_r = d_over_r;
  }
  if (cfg.command == Command::Sweep && !(cfg.sweep_to >= cfg.sweep_from)) {
    err << "usage error: --to must not be below --from\n";
    return kUsage;
  }

  std::ostringstream buffer;
  int code = kOk;
  switch (cfg.command) {
    case Command::Energy: code = run_energy(cfg, buffer, err); break;
    case Command::Force: code = run_force(cfg, buffer, err); break;
    case Command::Sweep: code = run_sweep(cfg, buffer, err); break;
    case Command::Asympt: code = run_asympt(cfg, buffer, err); break;
    case Command::Validate: code = run_validate(cfg, buffer, err); break;
  }
  if (cfg.out.empty()) {
    out << buffer.str();
  } else {
    std::ofstream file(cfg.out);
    if (!file) {
      err << "usage error: cannot open " << cfg.out << " for writing\n";
      return kUsage;
    }
    file << buffer.str();
  }
  return code;
}

}  // namespace casimir::cli
