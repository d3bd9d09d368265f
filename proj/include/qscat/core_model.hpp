#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qscat/errors.hpp"

namespace qscat {

inline constexpr double kDefaultGapTolerance = 1e-9;

// Spatial shape of the interaction, normalized to unit mean over the support
// [-a/2, a/2] and zero outside it.
//   cosine        (pi/2) cos(pi x / a)
//   flat          1                      (square barrier)
//   tilted_cosine (pi/2) cos(pi x / a) (1 + x / a), not mirror symmetric
enum class ProfileShape { cosine, flat, tilted_cosine };

std::string_view to_string(ProfileShape shape);
ProfileShape parse_profile_shape(std::string_view name);

struct PotentialProfile {
  double V0 = 100.0;
  double a = 1.0;
  ProfileShape shape = ProfileShape::cosine;

  // Dimensionless shape value v(x); the potential is V0 * v(x) * W.
  double shape_value(double x) const;
  bool mirror_symmetric() const { return shape != ProfileShape::tilted_cosine; }
};

enum class CouplingPattern { pauli_x, all_ones_offdiag };

std::string_view to_string(CouplingPattern pattern);
CouplingPattern parse_coupling_pattern(std::string_view name);
Eigen::MatrixXd coupling_matrix(CouplingPattern pattern, std::size_t n);

// N-level scatterer: H_S = diag(levels), V(x) = V0 v(x) W.
class SystemSpec {
 public:
  SystemSpec(std::vector<double> levels, Eigen::MatrixXd coupling,
             PotentialProfile profile, double mass = 1.0, double hbar = 1.0);

  // Equally spaced levels e_j = (j - (n-1)/2) delta; for n = 2 this is
  // H_S = (delta/2) sigma_z.
  static SystemSpec ladder(std::size_t n, double delta, CouplingPattern pattern,
                           PotentialProfile profile, double mass = 1.0,
                           double hbar = 1.0);

  std::size_t size() const { return levels_.size(); }
  const std::vector<double>& levels() const { return levels_; }
  double level(std::size_t j) const { return levels_[j]; }
  const Eigen::MatrixXd& coupling() const { return coupling_; }
  const PotentialProfile& profile() const { return profile_; }
  double mass() const { return mass_; }
  double hbar() const { return hbar_; }

  // diag(levels) + V0 v(x) W.
  Eigen::MatrixXd channel_matrix(double x) const;
  Eigen::MatrixXd system_hamiltonian() const;

  // Potential free of coupling: either V0 == 0 or W == 0.
  bool is_free() const;

 private:
  std::vector<double> levels_;
  Eigen::MatrixXd coupling_;
  PotentialProfile profile_;
  double mass_;
  double hbar_;
};

struct ThermalState {
  double beta = 0.0;
  std::vector<double> levels;
  std::vector<double> populations;
  double partition = 1.0;
};

ThermalState thermal_state(const SystemSpec& spec, double beta);
ThermalState thermal_state(const std::vector<double>& levels, double beta);

struct LevelPair {
  std::size_t upper = 0;  // j'
  std::size_t lower = 0;  // j
  double pair_partition = 0.0;  // Z_{j'j} = exp(-beta e_j') + exp(-beta e_j)
};

struct GapStructure {
  double beta = 0.0;
  double tolerance = kDefaultGapTolerance;
  double partition = 1.0;
  std::vector<double> gaps;                   // distinct, positive, ascending
  std::vector<std::vector<LevelPair>> pairs;  // one bucket per gap

  // {-gaps (descending), 0, +gaps}: every energy change the spectrum allows.
  std::vector<double> signed_support() const;
  std::size_t pair_count() const;
};

GapStructure gap_structure(const SystemSpec& spec, double beta,
                           double tolerance = kDefaultGapTolerance);
GapStructure gap_structure(const std::vector<double>& levels, double beta,
                           double tolerance = kDefaultGapTolerance);

// Index of `value` in a sorted support within `tolerance`, if present.
std::optional<std::size_t> find_support_index(const std::vector<double>& support,
                                              double value,
                                              double tolerance = kDefaultGapTolerance);

struct ChannelBasis {
  double energy = 0.0;
  std::vector<bool> open;
  std::vector<double> k;      // open channels, zero otherwise
  std::vector<double> kappa;  // closed channels, zero otherwise

  std::size_t n_open() const;
  bool has_open() const { return n_open() > 0; }
  std::vector<std::size_t> open_levels() const;
};

ChannelBasis channel_basis(const SystemSpec& spec, double energy);

}  // namespace qscat
