#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "qscat/fluct_stats.hpp"

namespace qscat {

// Arbitrary CPTP map sum_l K_l . K_l^dagger between the eigenbases of an
// initial and a final Hamiltonian (both non-degenerate).
struct KrausMap {
  std::vector<Eigen::MatrixXcd> operators;
  Eigen::MatrixXcd h_initial;
  Eigen::MatrixXcd h_final;

  Eigen::Index dim() const { return h_initial.rows(); }
  // Throws InvalidParameter on shape errors or when sum K^dagger K != I.
  void validate(double tolerance = 1e-10) const;
  Eigen::MatrixXcd apply(const Eigen::MatrixXcd& rho) const;
  Eigen::MatrixXcd on_identity() const;
};

// Eigen-decomposition with the non-degeneracy check used by every routine
// below (UnsupportedDegeneracy when two eigenvalues are closer than tol).
struct EnergyBasis {
  Eigen::VectorXd energies;  // ascending
  Eigen::MatrixXcd vectors;  // columns
};
EnergyBasis energy_basis(const Eigen::MatrixXcd& h, double tolerance = kDefaultGapTolerance);

// Two-point-measurement distribution: mass |<E'_m|K_l|E_n>|^2 p_n at E'_m - E_n.
EnergyChangeDistribution tpm_distribution(const KrausMap& map, double beta,
                                          double tolerance = kDefaultGapTolerance);
// Dual: mass |<E'_m|K_l|E_n>|^2 p'_m at E_n - E'_m, total gamma.
EnergyChangeDistribution tpm_dual_distribution(const KrausMap& map, double beta,
                                               double tolerance = kDefaultGapTolerance);

struct JarzynskiResult {
  double lhs = 0.0;       // sum e^{-beta W} P(W)
  double rhs = 0.0;       // e^{-beta dF} gamma
  double gamma = 1.0;
  double delta_F = 0.0;   // -beta^{-1} ln(Z'/Z)
  double avg_W = 0.0;
  double bound = 0.0;     // dF - beta^{-1} ln gamma
  double relation_residual = 0.0;  // max |e^{-beta W} P(W) - e^{-beta dF} p(-W)|
};

JarzynskiResult modified_jarzynski(const KrausMap& map, double beta,
                                   double tolerance = kDefaultGapTolerance);

// Seeded random map. Non-unital maps come from a random isometry
// (D L x D, QR of a complex Gaussian matrix); unital maps are mixtures of L
// Haar unitaries with random weights. Hamiltonians are random Hermitian
// matrices; same_hamiltonian makes the final one equal the initial one.
KrausMap random_map(std::size_t dim, std::size_t rank, std::uint64_t seed, bool unital,
                    bool same_hamiltonian = false);

// The scattering eigenoperators as a cyclic process (H_final = H_initial = H_S).
KrausMap from_eigenoperators(const EigenoperatorSet& eops);

}  // namespace qscat
