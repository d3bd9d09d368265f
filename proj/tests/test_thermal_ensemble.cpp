#include <doctest.h>

#include <cmath>

#include "qscat/thermal_ensemble.hpp"

using namespace qscat;

namespace {

SystemSpec model(std::size_t n, double v0 = 100.0, ProfileShape shape = ProfileShape::cosine) {
  return SystemSpec::ladder(n, 1.0,
                            n == 2 ? CouplingPattern::pauli_x : CouplingPattern::all_ones_offdiag,
                            {v0, 1.0, shape});
}

}  // namespace

TEST_CASE("thermal quadrature integrates the density") {
  for (double bt : {0.5, 1.0, 3.0}) {
    const auto dist = ParticleEnergyDistribution::thermal(bt, 200);
    const SystemSpec spec = model(3);
    const auto rules = quadrature_rules(dist, spec, 1e-8);
    REQUIRE(rules.size() == 3);
    for (const ColumnRule& r : rules) {
      double sum = 0.0;
      for (double w : r.weights) sum += w;
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
    // Mean kinetic energy 1/bt for column 0.
    double mean = 0.0;
    for (std::size_t i = 0; i < rules[0].energies.size(); ++i)
      mean += rules[0].weights[i] * (rules[0].energies[i] - spec.level(0));
    CHECK(mean == doctest::Approx(1.0 / bt).epsilon(1e-9));
  }
}

TEST_CASE("delta distribution reproduces the direction-averaged table") {
  const ScatteringSolver solver(model(3), {});
  const StochasticMatrix s = stochastic_matrix(solver, ParticleEnergyDistribution::delta(2.2));
  const TransitionProbabilities tp = averaged_transition_probabilities(solver, 2.2);
  CHECK((s.s - tp.p).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(column_stochasticity_residual(s) < 1e-8);
}

TEST_CASE("free potential gives the identity") {
  const ScatteringSolver solver(model(2, 0.0), {});
  const StochasticMatrix s =
      stochastic_matrix(solver, ParticleEnergyDistribution::thermal(1.0, 100));
  CHECK((s.s - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-9);
  const ThermalState th = thermal_state(solver.spec(), 0.3);
  const EnergyChangeDistribution p = unconditioned_distribution(s, th);
  CHECK(p.at(0.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(heat_exchange_ft_check(s, th, 1.0).residual < 1e-9);
}

TEST_CASE("two-level thermal ensemble: stochastic, detailed balance, heat relation") {
  const ScatteringSolver solver(model(2), {});
  for (double bt : {0.5, 1.0}) {
    StochasticOptions opt;
    opt.check_convergence = true;
    opt.threads = 4;
    const StochasticMatrix s =
        stochastic_matrix(solver, ParticleEnergyDistribution::thermal(bt), opt);
    CHECK(s.convergence_change >= 0.0);
    CHECK(s.convergence_change < 1e-6);
    CHECK(column_stochasticity_residual(s) < 1e-6);
    const BalanceCheck db = detailed_balance_check(s, bt);
    CHECK(db.applicable);
    CHECK(db.residual < 1e-6);
    for (double beta : {0.1, bt, 2.0}) {
      const ThermalState th = thermal_state(solver.spec(), beta);
      const BalanceCheck h = heat_exchange_ft_check(s, th, bt);
      CHECK(h.residual < 1e-6);
      const StochasticMatrix exact = renormalized(s);
      CHECK(column_stochasticity_residual(exact) < 1e-14);
      const EnergyChangeDistribution p = unconditioned_distribution(exact, th);
      const EnergyChangeDistribution d = unconditioned_dual(exact, th);
      CHECK(fluctuation_residual(p, d, beta) < 1e-8);
      CHECK(p.at(-1.0) == doctest::Approx(exact.s(0, 1) * th.populations[1]).epsilon(1e-14));
    }
  }
}

TEST_CASE("heat relation residual is controlled by the detailed balance residual") {
  // Perturb an exactly balanced matrix and compare both residuals.
  const ScatteringSolver solver(model(3, 30.0), {});
  const StochasticMatrix s =
      stochastic_matrix(solver, ParticleEnergyDistribution::thermal(0.5, 200));
  const ThermalState th = thermal_state(solver.spec(), 0.1);
  for (double eps : {0.0, 1e-8, 1e-6, 1e-4}) {
    StochasticMatrix p = s;
    p.s(1, 0) += eps;
    p.s(0, 0) -= eps;
    const double db = detailed_balance_check(p, 0.5).residual;
    const double h4 = heat_exchange_ft_check(p, th, 0.5).residual;
    CHECK(h4 <= 10.0 * db + 1e-12);
  }
}

TEST_CASE("asymmetric potential with asymmetric direction weights is flagged") {
  const ScatteringSolver solver(model(2, 40.0, ProfileShape::tilted_cosine), {});
  auto dist = ParticleEnergyDistribution::thermal(1.0, 100);
  dist.direction_weights = {1.0, 0.0};
  const StochasticMatrix s = stochastic_matrix(solver, dist);
  CHECK_FALSE(detailed_balance_check(s, 1.0).applicable);
  dist.direction_weights = {0.5, 0.5};
  const StochasticMatrix t = stochastic_matrix(solver, dist);
  const BalanceCheck c = detailed_balance_check(t, 1.0);
  CHECK(c.applicable);
  CHECK(c.residual < 1e-10);
  CHECK_FALSE(detailed_balance_check(t, 2.0).applicable);
  CHECK_THROWS_AS(detailed_balance_check(t, 0.0), InvalidParameter);
}

TEST_CASE("distribution validation") {
  CHECK_THROWS_AS(ParticleEnergyDistribution::thermal(0.0), InvalidParameter);
  CHECK_THROWS_AS(ParticleEnergyDistribution::delta(0.0), InvalidParameter);
  CHECK_THROWS_AS(ParticleEnergyDistribution::tabulated({1.0}, {0.5}), InvalidParameter);
  const auto tab = ParticleEnergyDistribution::tabulated({0.5, 2.0}, {0.25, 0.75});
  const ScatteringSolver solver(model(2), {});
  const StochasticMatrix s = stochastic_matrix(solver, tab);
  const Eigen::MatrixXd expect = 0.25 * averaged_transition_probabilities(solver, 0.5).p +
                                 0.75 * averaged_transition_probabilities(solver, 2.0).p;
  CHECK((s.s - expect).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_FALSE(detailed_balance_check(s, 1.0).applicable);
}
