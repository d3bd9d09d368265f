#include "qscat/map_builder.hpp"

#include <cmath>
#include <string>

namespace qscat {

namespace {

using cd = std::complex<double>;

void check_same_levels(const std::vector<double>& a, const std::vector<double>& b) {
  if (a != b) throw SpecMismatch("objects were built from different level sets");
}

}  // namespace

std::vector<Eigen::MatrixXcd> EigenoperatorSet::kraus() const {
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(2 * operators.size());
  for (const auto& pair : operators)
    for (const auto& k : pair) out.push_back(k);
  return out;
}

double clear_of_thresholds(const SystemSpec& spec, double kinetic_energy, double guard) {
  double ep = kinetic_energy;
  for (int step = 0; step < 1000; ++step) {
    bool hit = false;
    for (double ej : spec.levels())
      for (double ek : spec.levels()) hit = hit || std::abs(ep + ej - ek) < guard;
    if (!hit) return ep;
    ep += 2.0 * guard;
  }
  throw InvalidParameter("cannot move kinetic energy clear of thresholds");
}

EigenoperatorSet eigenoperators(const ScatteringSolver& solver, double kinetic_energy,
                                Direction incoming) {
  if (!(kinetic_energy > 0.0) || !std::isfinite(kinetic_energy))
    throw InvalidParameter("kinetic energy must be finite and > 0");
  const SystemSpec& spec = solver.spec();
  const double tol = solver.settings().gap_tolerance;
  const auto n = static_cast<Eigen::Index>(spec.size());

  EigenoperatorSet set;
  set.kinetic_energy = kinetic_energy;
  set.incoming = incoming;
  set.levels = spec.levels();
  set.support = gap_structure(spec.levels(), 0.0, tol).signed_support();
  set.operators.resize(set.support.size());
  for (auto& pair : set.operators)
    for (auto& k : pair) k = Eigen::MatrixXcd::Zero(n, n);

  for (std::size_t j = 0; j < spec.size(); ++j) {
    const ScatteringMatrixE sm = solver.solve(kinetic_energy + spec.level(j));
    for (std::size_t jp : sm.open) {
      const auto k = find_support_index(set.support, spec.level(jp) - spec.level(j), tol);
      if (!k) throw InvalidState("energy jump missing from the gap support");
      for (Direction out : kDirections)
        set.operators[*k][static_cast<std::size_t>(direction_index(out))](
            static_cast<Eigen::Index>(jp), static_cast<Eigen::Index>(j)) =
            sm.amplitude(out, jp, incoming, j);
    }
  }
  return set;
}

TransitionProbabilities transition_probabilities(const EigenoperatorSet& eops) {
  TransitionProbabilities tp;
  tp.kinetic_energy = eops.kinetic_energy;
  tp.incoming = eops.incoming;
  tp.levels = eops.levels;
  const auto n = static_cast<Eigen::Index>(eops.size());
  tp.p = Eigen::MatrixXd::Zero(n, n);
  // Each (j', j) lives in exactly one jump bucket.
  for (const auto& pair : eops.operators)
    for (const auto& k : pair) tp.p += k.cwiseAbs2();
  return tp;
}

TransitionProbabilities averaged_transition_probabilities(const EigenoperatorSet& plus,
                                                          const EigenoperatorSet& minus) {
  check_same_levels(plus.levels, minus.levels);
  if (plus.kinetic_energy != minus.kinetic_energy || plus.incoming == minus.incoming)
    throw InvalidParameter("averaging needs both incoming directions at one kinetic energy");
  TransitionProbabilities tp = transition_probabilities(plus);
  tp.p = 0.5 * (tp.p + transition_probabilities(minus).p);
  tp.incoming.reset();
  return tp;
}

TransitionProbabilities averaged_transition_probabilities(const ScatteringSolver& solver,
                                                          double kinetic_energy) {
  return averaged_transition_probabilities(
      eigenoperators(solver, kinetic_energy, Direction::plus),
      eigenoperators(solver, kinetic_energy, Direction::minus));
}

void validate_density_matrix(const Eigen::MatrixXcd& rho, double tolerance) {
  if (rho.rows() != rho.cols() || rho.rows() == 0)
    throw InvalidState("density matrix must be square and non-empty");
  if (!rho.allFinite()) throw InvalidState("density matrix has non-finite entries");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tolerance)
    throw InvalidState("density matrix is not Hermitian");
  if (std::abs(rho.trace() - cd(1.0, 0.0)) > tolerance)
    throw InvalidState("density matrix trace is not 1");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tolerance)
    throw InvalidState("density matrix is not positive semidefinite");
}

Eigen::MatrixXcd apply_map(const EigenoperatorSet& eops, const Eigen::MatrixXcd& rho) {
  const auto n = static_cast<Eigen::Index>(eops.size());
  if (rho.rows() != n) throw SpecMismatch("density matrix dimension differs from the system");
  validate_density_matrix(rho);
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& pair : eops.operators)
    for (const auto& k : pair) out += k * rho * k.adjoint();
  return out;
}

Eigen::MatrixXcd map_on_identity(const EigenoperatorSet& eops) {
  const auto n = static_cast<Eigen::Index>(eops.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& pair : eops.operators)
    for (const auto& k : pair) out += k * k.adjoint();
  return out;
}

Eigen::MatrixXcd completeness(const EigenoperatorSet& eops) {
  const auto n = static_cast<Eigen::Index>(eops.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& pair : eops.operators)
    for (const auto& k : pair) out += k.adjoint() * k;
  return out;
}

Eigen::MatrixXd effective_hamiltonian(const EigenoperatorSet& eops, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw InvalidParameter("effective Hamiltonian needs finite beta > 0");
  const Eigen::VectorXd phi = map_on_identity(eops).diagonal().real();
  if (phi.minCoeff() <= 0.0)
    throw DegenerateDistribution("map on identity has a vanishing diagonal entry");
  Eigen::VectorXd h(phi.size());
  for (Eigen::Index k = 0; k < phi.size(); ++k)
    h(k) = eops.levels[static_cast<std::size_t>(k)] - std::log(phi(k)) / beta;
  return h.asDiagonal();
}

double effective_partition(const EigenoperatorSet& eops, double beta) {
  // Tr e^{-beta H^alpha} = sum_k e^{-beta e_k} Phi(I)_kk, written without the
  // logarithm so beta = 0 and vanishing entries stay finite.
  const Eigen::VectorXd phi = map_on_identity(eops).diagonal().real();
  double z = 0.0;
  for (Eigen::Index k = 0; k < phi.size(); ++k)
    z += std::exp(-beta * eops.levels[static_cast<std::size_t>(k)]) * phi(k);
  return z;
}

double eigenoperator_residual(const EigenoperatorSet& eops) {
  const auto n = static_cast<Eigen::Index>(eops.size());
  const Eigen::MatrixXcd h =
      Eigen::Map<const Eigen::VectorXd>(eops.levels.data(), n).cast<cd>().asDiagonal();
  double worst = 0.0;
  for (std::size_t k = 0; k < eops.support.size(); ++k)
    for (const auto& op : eops.operators[k]) {
      if (op.size() == 0) continue;
      const Eigen::MatrixXcd r = h * op - op * h - eops.support[k] * op;
      worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
  return worst;
}

}  // namespace qscat
