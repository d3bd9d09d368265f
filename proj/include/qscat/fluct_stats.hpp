#pragma once

#include <optional>
#include <vector>

#include "qscat/map_builder.hpp"

namespace qscat {

// Point masses on a sorted support. The forward distribution is indexed by
// W; the dual is indexed by its own argument, i.e. weight at y is p(y) and
// the fluctuation relation pairs forward W with dual -W.
struct EnergyChangeDistribution {
  std::vector<double> support;
  std::vector<double> weights;
  bool normalized = false;
  double tolerance = kDefaultGapTolerance;

  double total() const;
  double mean() const;
  // Weight at w, 0 when w is not on the support.
  double at(double w) const;
};

// Point masses on `support`, built from a list of (value, weight) entries
// that must each land on it (within tolerance).
EnergyChangeDistribution make_distribution(std::vector<double> support,
                                           const std::vector<std::pair<double, double>>& masses,
                                           double tolerance = kDefaultGapTolerance);

// sum_{e_j' - e_j = W} P_{j'j} p_j
EnergyChangeDistribution forward_distribution(const TransitionProbabilities& tp,
                                              const ThermalState& th,
                                              double tolerance = kDefaultGapTolerance);
// weight at y = e_j - e_j' is sum p_j' P_{j'j}
EnergyChangeDistribution dual_distribution(const TransitionProbabilities& tp,
                                           const ThermalState& th,
                                           double tolerance = kDefaultGapTolerance);

// max over W of |e^{-beta W} P(W) - scale * dual(-W)| over the union of both
// supports. Throws SupportMismatch when the grids disagree.
double fluctuation_residual(const EnergyChangeDistribution& fwd,
                            const EnergyChangeDistribution& dual, double beta,
                            double scale = 1.0);
inline double verify_fluctuation_relation(const EnergyChangeDistribution& fwd,
                                          const EnergyChangeDistribution& dual, double beta) {
  return fluctuation_residual(fwd, dual, beta);
}

double eta_direct(const EnergyChangeDistribution& dual);
double eta_gapsum(const TransitionProbabilities& tp, const GapStructure& gaps,
                  const ThermalState& th);

struct FluctuationReport {
  double kinetic_energy = 0.0;
  std::optional<Direction> incoming;
  double beta = 0.0;
  double avg_W = 0.0;
  double gamma = 1.0;
  double eta = 0.0;
  double delta_F = 0.0;  // 0 by definition at beta = 0
  double sigma = 0.0;    // relative-entropy form
  double sigma_identity = 0.0;  // beta <W> + ln gamma
  double bound_slack = 0.0;
  double fluctuation_residual = 0.0;
};

FluctuationReport report(const TransitionProbabilities& tp, const ThermalState& th,
                         const GapStructure& gaps);

struct MicroreversibilityResult {
  double residual = 0.0;
  std::vector<double> checked;  // W values compared
  std::vector<double> skipped;  // W values with E_p - W at or below threshold
};

// e^{-beta W} P(E_p, W) against P(E_p - W, -W) with direction-averaged
// probabilities. A fixed direction is allowed only for mirror-symmetric
// potentials.
MicroreversibilityResult microreversibility_check(const ScatteringSolver& solver,
                                                  double kinetic_energy,
                                                  const ThermalState& th,
                                                  std::optional<Direction> direction = {});

double fermi(double x);
double threshold_temperature(double delta);
// Largest extractable average energy at low kinetic energy: Delta f(beta Delta).
double extraction_ceiling(double beta, double delta);
// Largest consumed average energy in the unital regime: Delta tanh(beta Delta / 2).
double consumption_ceiling(double beta, double delta);

}  // namespace qscat
