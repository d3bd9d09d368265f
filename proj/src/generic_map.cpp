#include "qscat/generic_map.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace qscat {

namespace {

using cd = std::complex<double>;

Eigen::MatrixXcd ginibre(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = cd(g(rng), g(rng));
  return m;
}

// Q factor with the R-diagonal phases divided out (Haar for square input).
Eigen::MatrixXcd orthonormal_columns(const Eigen::MatrixXcd& z) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  const Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(z.rows(), z.cols());
  const Eigen::MatrixXcd r = qr.matrixQR().topRows(z.cols()).triangularView<Eigen::Upper>();
  Eigen::MatrixXcd out = q;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double mag = std::abs(r(j, j));
    if (mag > 0.0) out.col(j) *= r(j, j) / mag;
  }
  return out;
}

Eigen::MatrixXcd random_hermitian(Eigen::Index d, std::mt19937_64& rng) {
  const Eigen::MatrixXcd g = ginibre(d, d, rng);
  return 0.5 * (g + g.adjoint());
}

std::vector<double> cluster(std::vector<double> values, double tolerance) {
  std::sort(values.begin(), values.end());
  std::vector<double> reps;
  for (double v : values)
    if (reps.empty() || v - reps.back() > tolerance) reps.push_back(v);
  return reps;
}

struct TpmTerms {
  std::vector<double> support;  // forward
  std::vector<std::pair<double, double>> forward;
  std::vector<std::pair<double, double>> dual;
  double z_initial = 1.0;
  double z_final = 1.0;
};

TpmTerms tpm_terms(const KrausMap& map, double beta, double tolerance) {
  map.validate();
  const EnergyBasis b0 = energy_basis(map.h_initial, tolerance);
  const EnergyBasis b1 = energy_basis(map.h_final, tolerance);
  const std::vector<double> e0(b0.energies.data(), b0.energies.data() + b0.energies.size());
  const std::vector<double> e1(b1.energies.data(), b1.energies.data() + b1.energies.size());
  const ThermalState th0 = thermal_state(e0, beta);
  const ThermalState th1 = thermal_state(e1, beta);

  TpmTerms t;
  t.z_initial = th0.partition;
  t.z_final = th1.partition;
  std::vector<double> diffs;
  for (double em : e1)
    for (double en : e0) diffs.push_back(em - en);
  t.support = cluster(diffs, tolerance);

  for (const auto& k : map.operators) {
    const Eigen::MatrixXd amp2 = (b1.vectors.adjoint() * k * b0.vectors).cwiseAbs2();
    for (std::size_t m = 0; m < e1.size(); ++m)
      for (std::size_t n = 0; n < e0.size(); ++n) {
        const double a = amp2(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        t.forward.emplace_back(e1[m] - e0[n], a * th0.populations[n]);
        t.dual.emplace_back(e0[n] - e1[m], a * th1.populations[m]);
      }
  }
  return t;
}

std::vector<double> negated(const std::vector<double>& support) {
  std::vector<double> out(support.rbegin(), support.rend());
  for (double& v : out) v = -v;
  return out;
}

}  // namespace

void KrausMap::validate(double tolerance) const {
  const Eigen::Index d = h_initial.rows();
  if (d == 0 || h_initial.cols() != d || h_final.rows() != d || h_final.cols() != d)
    throw InvalidParameter("Hamiltonians must be square with equal dimensions");
  if ((h_initial - h_initial.adjoint()).cwiseAbs().maxCoeff() > tolerance ||
      (h_final - h_final.adjoint()).cwiseAbs().maxCoeff() > tolerance)
    throw InvalidParameter("Hamiltonians must be Hermitian");
  if (operators.empty()) throw InvalidParameter("map needs at least one Kraus operator");
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(d, d);
  for (const auto& k : operators) {
    if (k.rows() != d || k.cols() != d) throw InvalidParameter("Kraus operator has wrong shape");
    sum += k.adjoint() * k;
  }
  if ((sum - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff() > tolerance)
    throw InvalidParameter("Kraus operators are not trace preserving");
}

Eigen::MatrixXcd KrausMap::apply(const Eigen::MatrixXcd& rho) const {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim(), dim());
  for (const auto& k : operators) out += k * rho * k.adjoint();
  return out;
}

Eigen::MatrixXcd KrausMap::on_identity() const {
  return apply(Eigen::MatrixXcd::Identity(dim(), dim()));
}

EnergyBasis energy_basis(const Eigen::MatrixXcd& h, double tolerance) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success) throw InvalidParameter("eigen-decomposition failed");
  EnergyBasis b{es.eigenvalues(), es.eigenvectors()};
  for (Eigen::Index i = 1; i < b.energies.size(); ++i)
    if (b.energies(i) - b.energies(i - 1) <= tolerance)
      throw UnsupportedDegeneracy("Hamiltonian has a degenerate spectrum");
  return b;
}

EnergyChangeDistribution tpm_distribution(const KrausMap& map, double beta, double tolerance) {
  const TpmTerms t = tpm_terms(map, beta, tolerance);
  EnergyChangeDistribution d = make_distribution(t.support, t.forward, tolerance);
  d.normalized = true;
  return d;
}

EnergyChangeDistribution tpm_dual_distribution(const KrausMap& map, double beta,
                                               double tolerance) {
  const TpmTerms t = tpm_terms(map, beta, tolerance);
  return make_distribution(negated(t.support), t.dual, tolerance);
}

JarzynskiResult modified_jarzynski(const KrausMap& map, double beta, double tolerance) {
  const TpmTerms t = tpm_terms(map, beta, tolerance);
  const EnergyChangeDistribution fwd = make_distribution(t.support, t.forward, tolerance);
  const EnergyChangeDistribution dual = make_distribution(negated(t.support), t.dual, tolerance);
  JarzynskiResult r;
  const double ratio = t.z_final / t.z_initial;
  r.gamma = dual.total();
  r.delta_F = beta > 0.0 ? -std::log(ratio) / beta : 0.0;
  r.avg_W = fwd.mean();
  r.bound = beta > 0.0 ? r.delta_F - std::log(r.gamma) / beta : 0.0;
  for (std::size_t i = 0; i < fwd.support.size(); ++i)
    r.lhs += std::exp(-beta * fwd.support[i]) * fwd.weights[i];
  r.rhs = ratio * r.gamma;
  r.relation_residual = fluctuation_residual(fwd, dual, beta, ratio);
  return r;
}

KrausMap random_map(std::size_t dim, std::size_t rank, std::uint64_t seed, bool unital,
                    bool same_hamiltonian) {
  if (dim < 2) throw InvalidParameter("random map needs dimension >= 2");
  if (rank < 1) throw InvalidParameter("random map needs Kraus rank >= 1");
  std::mt19937_64 rng(seed);
  const auto d = static_cast<Eigen::Index>(dim);
  const auto l = static_cast<Eigen::Index>(rank);
  KrausMap map;
  if (unital) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> q(rank);
    double sum = 0.0;
    for (double& x : q) sum += (x = u(rng));
    for (std::size_t i = 0; i < rank; ++i)
      map.operators.push_back(std::sqrt(q[i] / sum) * orthonormal_columns(ginibre(d, d, rng)));
  } else {
    const Eigen::MatrixXcd v = orthonormal_columns(ginibre(d * l, d, rng));
    for (Eigen::Index i = 0; i < l; ++i) map.operators.push_back(v.middleRows(i * d, d));
  }
  map.h_initial = random_hermitian(d, rng);
  map.h_final = same_hamiltonian ? map.h_initial : random_hermitian(d, rng);
  return map;
}

KrausMap from_eigenoperators(const EigenoperatorSet& eops) {
  KrausMap map;
  map.operators = eops.kraus();
  const auto n = static_cast<Eigen::Index>(eops.size());
  map.h_initial =
      Eigen::Map<const Eigen::VectorXd>(eops.levels.data(), n).cast<cd>().asDiagonal();
  map.h_final = map.h_initial;
  return map;
}

}  // namespace qscat
