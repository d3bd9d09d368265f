#include "qscat/thermal_ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <gsl/gsl_integration.h>

#include "qscat/parallel.hpp"

namespace qscat {

namespace {

struct GlTable {
  explicit GlTable(std::size_t n) : table(gsl_integration_glfixed_table_alloc(n)) {
    if (!table) throw InvalidParameter("cannot build Gauss-Legendre table");
  }
  ~GlTable() { gsl_integration_glfixed_table_free(table); }
  GlTable(const GlTable&) = delete;
  GlTable& operator=(const GlTable&) = delete;
  gsl_integration_glfixed_table* table;
};

// Keeps a node out of the threshold guard without moving it across the
// threshold.
double nudge(double energy, const std::vector<double>& levels, double guard) {
  for (double e : levels)
    if (std::abs(energy - e) < guard) return energy >= e ? e + 1.5 * guard : e - 1.5 * guard;
  return energy;
}

// Shared total-energy nodes of the thermal rule and the panel each starts in.
struct ThermalNodes {
  std::vector<double> energies;
  std::vector<double> weights;   // dE measure
  std::vector<std::size_t> panel;
};

ThermalNodes thermal_nodes(const ParticleEnergyDistribution& dist,
                           const std::vector<double>& levels, double guard) {
  const GlTable gl(dist.nodes);
  ThermalNodes out;
  const std::size_t n = levels.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double a = levels[k];
    const bool tail = k + 1 == n;
    const double length = tail ? dist.cutoff / dist.beta_tilde : levels[k + 1] - a;
    for (std::size_t i = 0; i < dist.nodes; ++i) {
      double t = 0.0, w = 0.0;
      gsl_integration_glfixed_point(0.0, 1.0, i, &t, &w, gl.table);
      double e = 0.0, jac = 0.0;
      if (tail) {
        e = a + length * t * t;
        jac = 2.0 * length * t;
      } else {
        e = a + length * t * t * (3.0 - 2.0 * t);
        jac = 6.0 * length * t * (1.0 - t);
      }
      out.energies.push_back(nudge(e, levels, guard));
      out.weights.push_back(w * jac);
      out.panel.push_back(k);
    }
  }
  return out;
}

}  // namespace

const char* to_string(EnergyDistributionKind kind) {
  switch (kind) {
    case EnergyDistributionKind::delta: return "delta";
    case EnergyDistributionKind::thermal: return "thermal";
    case EnergyDistributionKind::tabulated: return "tabulated";
  }
  return "thermal";
}

ParticleEnergyDistribution ParticleEnergyDistribution::delta(double kinetic_energy) {
  ParticleEnergyDistribution d;
  d.kind = EnergyDistributionKind::delta;
  d.kinetic_energy = kinetic_energy;
  d.validate();
  return d;
}

ParticleEnergyDistribution ParticleEnergyDistribution::thermal(double beta_tilde,
                                                               std::size_t nodes) {
  ParticleEnergyDistribution d;
  d.kind = EnergyDistributionKind::thermal;
  d.beta_tilde = beta_tilde;
  d.nodes = nodes;
  d.validate();
  return d;
}

ParticleEnergyDistribution ParticleEnergyDistribution::tabulated(std::vector<double> energies,
                                                                 std::vector<double> weights) {
  ParticleEnergyDistribution d;
  d.kind = EnergyDistributionKind::tabulated;
  d.table_energies = std::move(energies);
  d.table_weights = std::move(weights);
  d.validate();
  return d;
}

double ParticleEnergyDistribution::density(double ep) const {
  if (kind != EnergyDistributionKind::thermal)
    throw InvalidParameter("density is only defined for the thermal kind");
  return ep < 0.0 ? 0.0 : beta_tilde * std::exp(-beta_tilde * ep);
}

void ParticleEnergyDistribution::validate() const {
  for (double w : direction_weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidParameter("direction weights must be >= 0");
  if (std::abs(direction_weights[0] + direction_weights[1] - 1.0) > 1e-12)
    throw InvalidParameter("direction weights must sum to 1");
  switch (kind) {
    case EnergyDistributionKind::delta:
      if (!(kinetic_energy > 0.0) || !std::isfinite(kinetic_energy))
        throw InvalidParameter("delta distribution needs a kinetic energy > 0");
      break;
    case EnergyDistributionKind::thermal:
      if (!(beta_tilde > 0.0) || !std::isfinite(beta_tilde))
        throw InvalidParameter("thermal particle distribution needs finite beta_tilde > 0");
      if (nodes < 2) throw InvalidParameter("quadrature needs at least 2 nodes");
      if (!(cutoff > 0.0)) throw InvalidParameter("cutoff must be > 0");
      break;
    case EnergyDistributionKind::tabulated: {
      if (table_energies.empty() || table_energies.size() != table_weights.size())
        throw InvalidParameter("tabulated distribution needs matching energies and weights");
      double sum = 0.0;
      for (std::size_t i = 0; i < table_energies.size(); ++i) {
        if (!(table_energies[i] > 0.0)) throw InvalidParameter("tabulated energies must be > 0");
        if (!(table_weights[i] >= 0.0)) throw InvalidParameter("tabulated weights must be >= 0");
        sum += table_weights[i];
      }
      if (std::abs(sum - 1.0) > 1e-9) throw InvalidParameter("tabulated weights must sum to 1");
      break;
    }
  }
}

std::vector<ColumnRule> quadrature_rules(const ParticleEnergyDistribution& dist,
                                         const SystemSpec& spec, double threshold_guard) {
  dist.validate();
  const std::vector<double>& levels = spec.levels();
  std::vector<ColumnRule> rules(levels.size());
  switch (dist.kind) {
    case EnergyDistributionKind::delta:
      for (std::size_t j = 0; j < levels.size(); ++j) {
        rules[j].energies.push_back(nudge(dist.kinetic_energy + levels[j], levels, threshold_guard));
        rules[j].weights.push_back(1.0);
      }
      break;
    case EnergyDistributionKind::tabulated:
      for (std::size_t j = 0; j < levels.size(); ++j)
        for (std::size_t i = 0; i < dist.table_energies.size(); ++i) {
          rules[j].energies.push_back(
              nudge(dist.table_energies[i] + levels[j], levels, threshold_guard));
          rules[j].weights.push_back(dist.table_weights[i]);
        }
      break;
    case EnergyDistributionKind::thermal: {
      const ThermalNodes nodes = thermal_nodes(dist, levels, threshold_guard);
      for (std::size_t j = 0; j < levels.size(); ++j)
        for (std::size_t i = 0; i < nodes.energies.size(); ++i) {
          if (nodes.panel[i] < j) continue;
          rules[j].energies.push_back(nodes.energies[i]);
          rules[j].weights.push_back(nodes.weights[i] *
                                     dist.density(nodes.energies[i] - levels[j]));
        }
      break;
    }
  }
  return rules;
}

namespace {

StochasticMatrix assemble(const ScatteringSolver& solver, const ParticleEnergyDistribution& dist,
                          std::size_t threads) {
  const SystemSpec& spec = solver.spec();
  const std::vector<ColumnRule> rules =
      quadrature_rules(dist, spec, solver.settings().threshold_guard);

  std::vector<double> energies;
  for (const auto& r : rules) energies.insert(energies.end(), r.energies.begin(), r.energies.end());
  std::sort(energies.begin(), energies.end());
  energies.erase(std::unique(energies.begin(), energies.end()), energies.end());

  std::vector<ScatteringMatrixE> solved(energies.size());
  parallel_for(energies.size(), threads, [&](std::size_t i) { solved[i] = solver.solve(energies[i]); });

  const auto n = static_cast<Eigen::Index>(spec.size());
  StochasticMatrix out;
  out.levels = spec.levels();
  out.distribution = dist;
  out.mirror_symmetric = spec.profile().mirror_symmetric();
  out.solves = energies.size();
  out.s = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t j = 0; j < rules.size(); ++j)
    for (std::size_t i = 0; i < rules[j].energies.size(); ++i) {
      const auto it = std::lower_bound(energies.begin(), energies.end(), rules[j].energies[i]);
      const ScatteringMatrixE& sm = solved[static_cast<std::size_t>(it - energies.begin())];
      if (!sm.is_open(j)) continue;
      for (std::size_t jp : sm.open) {
        double p = 0.0;
        for (Direction in : kDirections) {
          const double dw = dist.direction_weights[static_cast<std::size_t>(direction_index(in))];
          if (dw == 0.0) continue;
          for (Direction out_dir : kDirections) p += dw * sm.probability(out_dir, jp, in, j);
        }
        out.s(static_cast<Eigen::Index>(jp), static_cast<Eigen::Index>(j)) +=
            rules[j].weights[i] * p;
      }
    }
  return out;
}

}  // namespace

StochasticMatrix stochastic_matrix(const ScatteringSolver& solver,
                                   const ParticleEnergyDistribution& dist,
                                   const StochasticOptions& options) {
  StochasticMatrix out = assemble(solver, dist, options.threads);
  if (options.check_convergence && dist.kind == EnergyDistributionKind::thermal) {
    ParticleEnergyDistribution finer = dist;
    finer.nodes *= 2;
    const StochasticMatrix fine = assemble(solver, finer, options.threads);
    out.convergence_change = (fine.s - out.s).cwiseAbs().maxCoeff();
    if (out.convergence_change > options.convergence_tolerance)
      throw QuadratureConvergence(out.convergence_change, options.convergence_tolerance);
  }
  return out;
}

double column_stochasticity_residual(const StochasticMatrix& s) {
  return (s.s.colwise().sum().array() - 1.0).abs().maxCoeff();
}

StochasticMatrix renormalized(const StochasticMatrix& s) {
  StochasticMatrix out = s;
  const Eigen::RowVectorXd sums = s.s.colwise().sum();
  for (Eigen::Index j = 0; j < s.s.cols(); ++j)
    if (sums(j) > 0.0) out.s.col(j) /= sums(j);
  return out;
}

EnergyChangeDistribution unconditioned_distribution(const StochasticMatrix& s,
                                                    const ThermalState& th, double tolerance) {
  TransitionProbabilities tp;
  tp.levels = s.levels;
  tp.p = s.s;
  EnergyChangeDistribution d = forward_distribution(tp, th, tolerance);
  d.normalized = std::abs(d.total() - 1.0) < 1e-9;
  return d;
}

EnergyChangeDistribution unconditioned_dual(const StochasticMatrix& s, const ThermalState& th,
                                            double tolerance) {
  TransitionProbabilities tp;
  tp.levels = s.levels;
  tp.p = s.s;
  return dual_distribution(tp, th, tolerance);
}

namespace {

BalanceCheck applicability(const StochasticMatrix& s, double beta_tilde) {
  if (!(beta_tilde > 0.0) || !std::isfinite(beta_tilde))
    throw InvalidParameter("detailed balance needs finite beta_tilde > 0");
  BalanceCheck c;
  const ParticleEnergyDistribution& d = s.distribution;
  if (d.kind != EnergyDistributionKind::thermal) {
    c.applicable = false;
    c.reason = "particle distribution is not thermal";
  } else if (d.beta_tilde != beta_tilde) {
    c.applicable = false;
    c.reason = "particle distribution has a different beta_tilde";
  } else if (!d.symmetric_directions() && !s.mirror_symmetric) {
    c.applicable = false;
    c.reason = "asymmetric potential with asymmetric direction weights is not reversible";
  }
  return c;
}

}  // namespace

BalanceCheck detailed_balance_check(const StochasticMatrix& s, double beta_tilde) {
  BalanceCheck c = applicability(s, beta_tilde);
  const auto n = s.s.rows();
  for (Eigen::Index jp = 0; jp < n; ++jp)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double factor =
          std::exp(-beta_tilde * (s.levels[static_cast<std::size_t>(jp)] -
                                  s.levels[static_cast<std::size_t>(j)]));
      c.residual = std::max(c.residual, std::abs(s.s(jp, j) - factor * s.s(j, jp)));
    }
  return c;
}

BalanceCheck heat_exchange_ft_check(const StochasticMatrix& s, const ThermalState& th,
                                    double beta_tilde) {
  BalanceCheck c = applicability(s, beta_tilde);
  const EnergyChangeDistribution p = unconditioned_distribution(s, th);
  for (std::size_t i = 0; i < p.support.size(); ++i) {
    const double w = p.support[i];
    c.residual = std::max(
        c.residual, std::abs(std::exp(-(th.beta - beta_tilde) * w) * p.weights[i] - p.at(-w)));
  }
  return c;
}

}  // namespace qscat
