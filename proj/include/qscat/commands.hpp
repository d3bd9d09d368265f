#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "qscat/config.hpp"
#include "qscat/fluct_stats.hpp"

namespace qscat {

enum ExitCode : int { kExitOk = 0, kExitInvariant = 1, kExitConfig = 2, kExitConvergence = 3 };

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::string> files;  // data files first, summary last
  nlohmann::json summary;
};

// Two-level Pauli-x, all-ones off-diagonal for N > 2 and the bare barrier
// (coupling [[1]]) for N = 1, on the ladder spacing of cfg.
RunConfig figure_model(const RunConfig& cfg, std::size_t n);

// One kinetic energy of a sweep: rows for alpha = +, - and the 1/2-1/2 average.
struct SweepPoint {
  double kinetic_energy = 0.0;
  std::array<FluctuationReport, 3> reports;
  std::array<Eigen::MatrixXd, 3> p;
  std::string error;  // empty on success
};
inline constexpr std::array<const char*, 3> kRowLabels{"+", "-", "avg"};

std::vector<SweepPoint> evaluate_points(const ScatteringSolver& solver, double beta,
                                        const std::vector<double>& kinetic_energies,
                                        std::size_t threads);

CommandResult cmd_sweep(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_verify(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_smatrix(const RunConfig& cfg, double energy, std::ostream& log);
CommandResult cmd_figure2(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_thermal(const RunConfig& cfg, std::ostream& log);

// %.17g, so every double survives a text round trip.
std::string format_double(double x);

struct SMatrixFile {
  ScatteringMatrixE sm;
  double unitarity_residual = 0.0;
  std::string config_hash;
};
SMatrixFile read_smatrix_csv(const std::string& path);

// Plain reader for the emitted CSV files: '#' lines, one header row, rows.
struct CsvTable {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
  std::string comment_value(const std::string& key) const;  // "key=value" lines
};
CsvTable read_csv(const std::string& path);

}  // namespace qscat
