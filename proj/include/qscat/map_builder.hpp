#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qscat/cc_solver.hpp"

namespace qscat {

// Kraus operators of the map conditioned on kinetic energy E_p and incoming
// direction alpha. operators[k][direction_index(alpha')] is the N x N
// operator for energy jump support[k]; entry (j', j) is
// s^{alpha' alpha}_{j'j}(E_p + e_j) when e_j' - e_j = support[k] and both
// channels are open, else 0.
struct EigenoperatorSet {
  double kinetic_energy = 0.0;
  Direction incoming = Direction::plus;
  std::vector<double> levels;
  std::vector<double> support;  // signed gaps, ascending, includes 0
  std::vector<std::array<Eigen::MatrixXcd, 2>> operators;

  std::size_t size() const { return levels.size(); }
  const Eigen::MatrixXcd& op(std::size_t k, Direction out) const {
    return operators[k][static_cast<std::size_t>(direction_index(out))];
  }
  // Flat list of every operator, ordered by (support index, alpha').
  std::vector<Eigen::MatrixXcd> kraus() const;
};

// Smallest E >= kinetic_energy, stepping up by twice the guard, for which no
// total energy E + e_j sits within the guard of a threshold. Commensurate
// ladders put integer kinetic energies exactly on thresholds.
double clear_of_thresholds(const SystemSpec& spec, double kinetic_energy, double guard);

EigenoperatorSet eigenoperators(const ScatteringSolver& solver, double kinetic_energy,
                                Direction incoming);

// P_{j'j}(E_p + e_j), rows j' and columns j. incoming is empty for the
// direction average (1/2) sum_{alpha, alpha'} |s|^2.
struct TransitionProbabilities {
  double kinetic_energy = 0.0;
  std::optional<Direction> incoming;
  std::vector<double> levels;
  Eigen::MatrixXd p;
};

TransitionProbabilities transition_probabilities(const EigenoperatorSet& eops);
TransitionProbabilities averaged_transition_probabilities(const EigenoperatorSet& plus,
                                                          const EigenoperatorSet& minus);
TransitionProbabilities averaged_transition_probabilities(const ScatteringSolver& solver,
                                                          double kinetic_energy);

// Throws InvalidState unless rho is Hermitian, PSD and of unit trace (1e-10).
void validate_density_matrix(const Eigen::MatrixXcd& rho, double tolerance = 1e-10);

Eigen::MatrixXcd apply_map(const EigenoperatorSet& eops, const Eigen::MatrixXcd& rho);

// sum K K^dagger: diagonal in the level basis, identity iff unital.
Eigen::MatrixXcd map_on_identity(const EigenoperatorSet& eops);
// sum K^dagger K, the identity for a trace-preserving map.
Eigen::MatrixXcd completeness(const EigenoperatorSet& eops);

// H_S - beta^{-1} log Phi(I) (diagonal) and its partition function.
Eigen::MatrixXd effective_hamiltonian(const EigenoperatorSet& eops, double beta);
double effective_partition(const EigenoperatorSet& eops, double beta);

// Largest entry of [H_S, K] - Delta K over all operators.
double eigenoperator_residual(const EigenoperatorSet& eops);

}  // namespace qscat
