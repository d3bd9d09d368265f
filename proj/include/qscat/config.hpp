#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qscat/cc_solver.hpp"
#include "qscat/thermal_ensemble.hpp"

namespace qscat {

// Levels either listed explicitly or as the ladder e_j = (j - (N-1)/2) Delta.
// coupling is "pauli-x", "all-ones-offdiag" or "explicit" (then
// coupling_matrix holds the N x N matrix).
struct SystemConfig {
  std::vector<double> levels;
  std::size_t n = 2;
  double delta = 1.0;
  std::string coupling = "pauli-x";
  std::vector<std::vector<double>> coupling_matrix;
  double V0 = 100.0;
  double a = 1.0;
  double mass = 1.0;
  double hbar = 1.0;
  std::string shape = "cosine";
  bool operator==(const SystemConfig&) const = default;
};

struct NumericsConfig {
  std::size_t slices = 2000;
  double threshold_guard = 1e-8;
  std::string scheme = "magnus4";
  double gap_tolerance = kDefaultGapTolerance;
  std::size_t quadrature_nodes = 400;  // per panel
  double cutoff = 40.0;                // E_max = e_top + cutoff / beta_tilde
  bool check_convergence = true;
  double quadrature_tolerance = 1e-6;
  double slice_tolerance = 1e-7;       // M vs 2M entry change allowed by verify
  bool operator==(const NumericsConfig&) const = default;
};

struct ThermoConfig {
  double beta = 0.1;
  std::optional<double> beta_tilde;
  bool operator==(const ThermoConfig&) const = default;
};

struct SweepConfig {
  double ep_min = 0.05;
  double ep_max = 100.0;
  std::size_t count = 200;
  std::string grid = "log";  // linear | log
  bool operator==(const SweepConfig&) const = default;
};

struct FigureConfig {
  std::size_t low_count = 400;   // E_p in (0, N Delta]
  double high_min = 10.0;
  double high_max = 100.0;
  std::size_t high_count = 400;
  double window = 5.0;           // moving-average width in E_p
  bool operator==(const FigureConfig&) const = default;
};

struct VerifyConfig {
  std::size_t random_maps = 100;
  std::size_t max_dim = 4;
  std::size_t max_rank = 5;
  std::size_t stride = 10;  // every stride-th sweep point gets the costly checks
  bool operator==(const VerifyConfig&) const = default;
};

struct OutputConfig {
  std::string dir = ".";
  std::string prefix;
  std::string format = "csv";
  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  SystemConfig system;
  NumericsConfig numerics;
  ThermoConfig thermo;
  SweepConfig sweep;
  FigureConfig figure;
  VerifyConfig verify;
  OutputConfig output;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& cfg);
// Strict: unknown keys and wrong types raise ConfigError naming the key.
// Missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

// "a.b.c=value"; the value is read as JSON when it parses, else as a string.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Throws ConfigError on any invalid or out-of-range field.
void validate(const RunConfig& cfg);

SystemSpec build_spec(const RunConfig& cfg);
SolverSettings build_settings(const RunConfig& cfg);
ParticleEnergyDistribution build_thermal_distribution(const RunConfig& cfg);

// Kinetic energies of the sweep grid, each moved clear of thresholds.
std::vector<double> sweep_grid(const RunConfig& cfg, const SystemSpec& spec);

// FNV-1a over the compact config dump, without execution-only settings
// (threads, output.dir), as 16 hex digits.
std::string config_hash(const RunConfig& cfg);
nlohmann::json hashed_config(const RunConfig& cfg);

}  // namespace qscat
