#include <doctest.h>

#include <cmath>
#include <map>

#include "qscat/generic_map.hpp"

using namespace qscat;

namespace {

using cd = std::complex<double>;

Eigen::MatrixXcd diag(std::initializer_list<double> v) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d(i++) = x;
  return d.cast<cd>().asDiagonal();
}

}  // namespace

TEST_CASE("energy-conserving unitary puts all mass at zero") {
  KrausMap m;
  m.h_initial = m.h_final = diag({-0.3, 0.4, 1.1});
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(3, 3);
  u.diagonal() << cd(0, 1), cd(-1, 0), std::polar(1.0, 0.3);
  m.operators = {u};
  const EnergyChangeDistribution p = tpm_distribution(m, 0.7);
  CHECK(p.at(0.0) == doctest::Approx(1.0).epsilon(1e-14));
  const JarzynskiResult j = modified_jarzynski(m, 0.7);
  CHECK(std::abs(j.gamma - 1.0) < 1e-14);
  CHECK(std::abs(j.lhs - 1.0) < 1e-14);
}

TEST_CASE("amplitude damping matches hand enumeration") {
  const double g = 0.3, beta = 0.9;
  KrausMap m;
  m.h_initial = m.h_final = diag({0.0, 1.0});
  Eigen::MatrixXcd k0 = Eigen::MatrixXcd::Zero(2, 2), k1 = Eigen::MatrixXcd::Zero(2, 2);
  k0(0, 0) = 1.0;
  k0(1, 1) = std::sqrt(1.0 - g);
  k1(0, 1) = std::sqrt(g);
  m.operators = {k0, k1};
  const double z = 1.0 + std::exp(-beta);
  const double p0 = 1.0 / z, p1 = std::exp(-beta) / z;
  const EnergyChangeDistribution p = tpm_distribution(m, beta);
  CHECK(p.at(0.0) == doctest::Approx(p0 + (1.0 - g) * p1).epsilon(1e-14));
  CHECK(p.at(-1.0) == doctest::Approx(g * p1).epsilon(1e-14));
  CHECK(p.at(1.0) == 0.0);
  const EnergyChangeDistribution d = tpm_dual_distribution(m, beta);
  CHECK(d.at(1.0) == doctest::Approx(g * p0).epsilon(1e-14));
  CHECK(d.total() == doctest::Approx(1.0 + g * (p0 - p1)).epsilon(1e-14));
}

TEST_CASE("random maps: trace preservation, relation and modified Jarzynski") {
  int count = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const std::size_t d = 2 + seed % 3;
    const std::size_t l = 1 + seed % 5;
    for (bool unital : {false, true}) {
      const KrausMap m = random_map(d, l, seed, unital);
      CHECK_NOTHROW(m.validate(1e-12));
      for (double beta : {0.3, 1.7}) {
        const EnergyChangeDistribution p = tpm_distribution(m, beta);
        CHECK(std::abs(p.total() - 1.0) < 1e-10);
        const JarzynskiResult j = modified_jarzynski(m, beta);
        CHECK(j.relation_residual < 1e-10);
        CHECK(std::abs(j.lhs - j.rhs) < 1e-10);
        CHECK(j.avg_W >= j.bound - 1e-10);
        if (unital) CHECK(std::abs(j.gamma - 1.0) < 1e-12);
        ++count;
      }
    }
  }
  CHECK(count == 160);
}

TEST_CASE("random map generator") {
  const KrausMap u = random_map(3, 4, 9, true);
  CHECK((u.on_identity() - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  const KrausMap n = random_map(3, 4, 9, false);
  CHECK((n.on_identity() - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() > 1e-3);
  const KrausMap again = random_map(3, 4, 9, false);
  REQUIRE(again.operators.size() == n.operators.size());
  for (std::size_t i = 0; i < n.operators.size(); ++i)
    CHECK((again.operators[i] - n.operators[i]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((again.h_initial - n.h_initial).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(random_map(1, 2, 0, false), InvalidParameter);
  CHECK_THROWS_AS(random_map(2, 0, 0, false), InvalidParameter);
}

TEST_CASE("degenerate Hamiltonians are rejected") {
  KrausMap m;
  m.h_initial = diag({0.0, 0.0});
  m.h_final = diag({0.0, 1.0});
  m.operators = {Eigen::MatrixXcd::Identity(2, 2)};
  CHECK_THROWS_AS(tpm_distribution(m, 1.0), UnsupportedDegeneracy);
  m.h_initial = diag({0.0, 1.0});
  m.operators = {0.5 * Eigen::MatrixXcd::Identity(2, 2)};
  CHECK_THROWS_AS(tpm_distribution(m, 1.0), InvalidParameter);
}

TEST_CASE("scattering eigenoperators as a Kraus map") {
  for (std::size_t n : {2u, 3u}) {
    const SystemSpec spec = SystemSpec::ladder(
        n, 1.0, n == 2 ? CouplingPattern::pauli_x : CouplingPattern::all_ones_offdiag,
        {100.0, 1.0, ProfileShape::cosine});
    const ScatteringSolver solver(spec, {});
    for (double raw : {0.4, 2.0, 6.5}) {
      const double ep = clear_of_thresholds(spec, raw, 1e-8);
      for (Direction a : kDirections) {
        const EigenoperatorSet e = eigenoperators(solver, ep, a);
        const KrausMap m = from_eigenoperators(e);
        const double beta = 0.1;
        const ThermalState th = thermal_state(spec, beta);
        const TransitionProbabilities tp = transition_probabilities(e);
        const EnergyChangeDistribution f0 = forward_distribution(tp, th);
        const EnergyChangeDistribution f1 = tpm_distribution(m, beta);
        for (double w : f0.support) CHECK(std::abs(f0.at(w) - f1.at(w)) < 1e-12);
        const JarzynskiResult j = modified_jarzynski(m, beta);
        CHECK(std::abs(j.gamma - dual_distribution(tp, th).total()) < 1e-10);
        CHECK(j.delta_F == 0.0);
      }
    }
  }
}
