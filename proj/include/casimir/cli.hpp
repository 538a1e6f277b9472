#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "casimir/scattering.hpp"

namespace casimir::cli {

enum ExitCode : int {
  kOk = 0,
  kValidationFailed = 1,
  kUsage = 2,
  kGeometry = 3,
  kConvergence = 4,
};

enum class Command { Energy, Force, Sweep, Asympt, Validate };
enum class Format { Csv, Json };

struct RunConfig {
  Command command = Command::Energy;
  scattering::BoundaryCondition bc = scattering::BoundaryCondition::Dirichlet;
  double r1 = 1.0;
  double r2 = 1.0;
  std::optional<double> d;
  std::optional<double> d_over_r;  ///< in units of R1
  int l_max = 0;                   ///< starting point of the l_max ladder; 0 picks the heuristic
  int n_max = 256;                 ///< hard cap on |n|
  double rel_tol = 1e-4;
  Format format = Format::Csv;
  std::string out;                 ///< empty: standard output
  double sweep_from = 1.0;
  double sweep_to = 100.0;
  int sweep_points = 12;
  int threads = 1;

  /// Surface gap in the same units as r1, r2.
  double gap() const;
};

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kSweepHeader = "d_over_R,E_over_E0,E_asympt_over_E0,ratio,status";

/// Parses argv and runs one subcommand. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int run_energy(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_force(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_asympt(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace casimir::cli
