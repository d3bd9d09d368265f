#pragma once

#include <array>
#include <string>
#include <vector>

#include "qscat/fluct_stats.hpp"

namespace qscat {

enum class EnergyDistributionKind { delta, thermal, tabulated };

const char* to_string(EnergyDistributionKind kind);

// Kinetic-energy distribution of the incoming particle, with weights over
// the incoming direction (index = direction_index).
struct ParticleEnergyDistribution {
  EnergyDistributionKind kind = EnergyDistributionKind::thermal;
  double kinetic_energy = 0.0;            // delta kind
  double beta_tilde = 0.0;                // thermal kind
  std::vector<double> table_energies;     // tabulated kind: nodes in E_p
  std::vector<double> table_weights;      //   and their quadrature weights
  std::array<double, 2> direction_weights{0.5, 0.5};
  std::size_t nodes = 400;                // Gauss-Legendre nodes per panel
  double cutoff = 40.0;                   // E_max = cutoff / beta_tilde

  static ParticleEnergyDistribution delta(double kinetic_energy);
  static ParticleEnergyDistribution thermal(double beta_tilde, std::size_t nodes = 400);
  static ParticleEnergyDistribution tabulated(std::vector<double> energies,
                                              std::vector<double> weights);

  double density(double kinetic_energy) const;  // thermal kind only
  bool symmetric_directions() const { return direction_weights[0] == direction_weights[1]; }
  void validate() const;
};

// Quadrature rule for one column j of the stochastic matrix: total energies
// E and weights w such that sum_i w_i f(E_i) approximates
// int dE_p rho(E_p) f(E_p + e_j).
struct ColumnRule {
  std::vector<double> energies;
  std::vector<double> weights;
};

// Thermal rules share one set of total-energy nodes between all columns:
// Gauss-Legendre panels between consecutive thresholds (smoothstep
// substitution, which removes the square-root behaviour at both ends) plus a
// tail panel above the highest threshold (quadratic substitution).
std::vector<ColumnRule> quadrature_rules(const ParticleEnergyDistribution& dist,
                                         const SystemSpec& spec, double threshold_guard);

struct StochasticMatrix {
  std::vector<double> levels;
  Eigen::MatrixXd s;
  ParticleEnergyDistribution distribution;
  bool mirror_symmetric = true;
  std::size_t solves = 0;
  double convergence_change = -1.0;  // set when the Q-doubling check ran
};

struct StochasticOptions {
  bool check_convergence = false;
  double convergence_tolerance = 1e-6;
  std::size_t threads = 1;
};

StochasticMatrix stochastic_matrix(const ScatteringSolver& solver,
                                   const ParticleEnergyDistribution& dist,
                                   const StochasticOptions& options = {});

// max_j |sum_j' S_j'j - 1|
double column_stochasticity_residual(const StochasticMatrix& s);
// Copy with every column divided by its sum.
StochasticMatrix renormalized(const StochasticMatrix& s);

EnergyChangeDistribution unconditioned_distribution(const StochasticMatrix& s,
                                                    const ThermalState& th,
                                                    double tolerance = kDefaultGapTolerance);
EnergyChangeDistribution unconditioned_dual(const StochasticMatrix& s, const ThermalState& th,
                                            double tolerance = kDefaultGapTolerance);

struct BalanceCheck {
  bool applicable = true;
  std::string reason;
  double residual = 0.0;
};

// max |S_j'j - e^{-bt (e_j' - e_j)} S_jj'|. Inapplicable unless the matrix
// was built from a thermal distribution at beta_tilde with either symmetric
// direction weights or a mirror-symmetric potential.
BalanceCheck detailed_balance_check(const StochasticMatrix& s, double beta_tilde);

// max_W |e^{-(beta - bt) W} P(W) - P(-W)| for the unconditioned P(W).
BalanceCheck heat_exchange_ft_check(const StochasticMatrix& s, const ThermalState& th,
                                    double beta_tilde);

}  // namespace qscat
