#include "qscat/fluct_stats.hpp"

#include <algorithm>
#include <cmath>

namespace qscat {

namespace {

void check_inputs(const TransitionProbabilities& tp, const ThermalState& th) {
  if (tp.levels != th.levels) throw SpecMismatch("transition table and thermal state differ");
  const auto n = static_cast<Eigen::Index>(tp.levels.size());
  if (tp.p.rows() != n || tp.p.cols() != n) throw SpecMismatch("transition table size");
}

}  // namespace

double EnergyChangeDistribution::total() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

double EnergyChangeDistribution::mean() const {
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) s += support[i] * weights[i];
  return s;
}

double EnergyChangeDistribution::at(double w) const {
  const auto k = find_support_index(support, w, tolerance);
  return k ? weights[*k] : 0.0;
}

EnergyChangeDistribution make_distribution(std::vector<double> support,
                                           const std::vector<std::pair<double, double>>& masses,
                                           double tolerance) {
  EnergyChangeDistribution d;
  d.support = std::move(support);
  d.tolerance = tolerance;
  d.weights.assign(d.support.size(), 0.0);
  for (const auto& [value, weight] : masses) {
    const auto k = find_support_index(d.support, value, tolerance);
    if (!k) throw SupportMismatch("mass placed off the support");
    d.weights[*k] += weight;
  }
  return d;
}

EnergyChangeDistribution forward_distribution(const TransitionProbabilities& tp,
                                              const ThermalState& th, double tolerance) {
  check_inputs(tp, th);
  const std::size_t n = tp.levels.size();
  std::vector<std::pair<double, double>> masses;
  masses.reserve(n * n);
  for (std::size_t jp = 0; jp < n; ++jp)
    for (std::size_t j = 0; j < n; ++j)
      masses.emplace_back(tp.levels[jp] - tp.levels[j],
                          tp.p(static_cast<Eigen::Index>(jp), static_cast<Eigen::Index>(j)) *
                              th.populations[j]);
  EnergyChangeDistribution d = make_distribution(
      gap_structure(tp.levels, th.beta, tolerance).signed_support(), masses, tolerance);
  d.normalized = true;
  return d;
}

EnergyChangeDistribution dual_distribution(const TransitionProbabilities& tp,
                                           const ThermalState& th, double tolerance) {
  check_inputs(tp, th);
  const std::size_t n = tp.levels.size();
  std::vector<std::pair<double, double>> masses;
  masses.reserve(n * n);
  for (std::size_t jp = 0; jp < n; ++jp)
    for (std::size_t j = 0; j < n; ++j)
      masses.emplace_back(tp.levels[j] - tp.levels[jp],
                          th.populations[jp] *
                              tp.p(static_cast<Eigen::Index>(jp), static_cast<Eigen::Index>(j)));
  EnergyChangeDistribution d = make_distribution(
      gap_structure(tp.levels, th.beta, tolerance).signed_support(), masses, tolerance);
  d.normalized = false;
  return d;
}

double fluctuation_residual(const EnergyChangeDistribution& fwd,
                            const EnergyChangeDistribution& dual, double beta, double scale) {
  const double tol = std::max(fwd.tolerance, dual.tolerance);
  // Every point of one support must have a partner on the other.
  for (double w : fwd.support)
    if (!find_support_index(dual.support, -w, tol) && fwd.at(w) != 0.0)
      throw SupportMismatch("forward support point without a dual partner");
  for (double y : dual.support)
    if (!find_support_index(fwd.support, -y, tol) && dual.at(y) != 0.0)
      throw SupportMismatch("dual support point without a forward partner");
  double worst = 0.0;
  for (std::size_t i = 0; i < fwd.support.size(); ++i) {
    const double w = fwd.support[i];
    worst = std::max(worst, std::abs(std::exp(-beta * w) * fwd.weights[i] - scale * dual.at(-w)));
  }
  for (double y : dual.support)
    if (!find_support_index(fwd.support, -y, tol))
      worst = std::max(worst, std::abs(scale * dual.at(y)));
  return worst;
}

double eta_direct(const EnergyChangeDistribution& dual) { return dual.total() - 1.0; }

double eta_gapsum(const TransitionProbabilities& tp, const GapStructure& gaps,
                  const ThermalState& th) {
  check_inputs(tp, th);
  if (gaps.beta != th.beta) throw SpecMismatch("gap structure built at a different beta");
  double eta = 0.0;
  for (std::size_t b = 0; b < gaps.gaps.size(); ++b) {
    double bracket = 0.0;
    for (const LevelPair& lp : gaps.pairs[b]) {
      const auto up = static_cast<Eigen::Index>(lp.upper);
      const auto lo = static_cast<Eigen::Index>(lp.lower);
      bracket += lp.pair_partition / th.partition * (tp.p(lo, up) - tp.p(up, lo));
    }
    eta += std::tanh(0.5 * th.beta * gaps.gaps[b]) * bracket;
  }
  return eta;
}

FluctuationReport report(const TransitionProbabilities& tp, const ThermalState& th,
                         const GapStructure& gaps) {
  const EnergyChangeDistribution fwd = forward_distribution(tp, th, gaps.tolerance);
  const EnergyChangeDistribution dual = dual_distribution(tp, th, gaps.tolerance);
  FluctuationReport r;
  r.kinetic_energy = tp.kinetic_energy;
  r.incoming = tp.incoming;
  r.beta = th.beta;
  const double mass = fwd.total();
  r.gamma = dual.total();
  if (!(mass > 0.0) || !(r.gamma > 0.0) || !std::isfinite(mass) || !std::isfinite(r.gamma))
    throw DegenerateDistribution("forward or dual distribution has no mass");
  r.avg_W = fwd.mean();
  r.eta = r.gamma - 1.0;
  r.delta_F = th.beta > 0.0 ? -std::log(r.gamma) / th.beta : 0.0;
  r.bound_slack = r.avg_W - r.delta_F;
  r.sigma_identity = th.beta * r.avg_W + std::log(r.gamma);

  // Relative entropy of P(W) against the normalized dual at -W.
  double sigma = 0.0;
  for (std::size_t i = 0; i < fwd.support.size(); ++i) {
    const double p = fwd.weights[i];
    if (p <= 0.0) continue;
    const double q = dual.at(-fwd.support[i]) / r.gamma;
    if (!(q > 0.0))
      throw DegenerateDistribution("forward mass where the dual distribution vanishes");
    sigma += p * std::log(p / q);
  }
  r.sigma = sigma;
  r.fluctuation_residual = fluctuation_residual(fwd, dual, th.beta);
  return r;
}

MicroreversibilityResult microreversibility_check(const ScatteringSolver& solver,
                                                  double kinetic_energy,
                                                  const ThermalState& th,
                                                  std::optional<Direction> direction) {
  const SystemSpec& spec = solver.spec();
  if (direction && !spec.profile().mirror_symmetric())
    throw InvalidParameter(
        "a fixed incoming direction is only reversible for mirror-symmetric potentials");
  if (th.levels != spec.levels()) throw SpecMismatch("thermal state built for another system");
  const double tol = solver.settings().gap_tolerance;
  const TransitionProbabilities tp =
      direction ? transition_probabilities(eigenoperators(solver, kinetic_energy, *direction))
                : averaged_transition_probabilities(solver, kinetic_energy);
  const EnergyChangeDistribution here = forward_distribution(tp, th, tol);

  // P_{to, from} at total energy e, averaged over directions unless fixed.
  auto prob = [&](const ScatteringMatrixE& sm, std::size_t to, std::size_t from) {
    double p = 0.0;
    for (Direction in : kDirections) {
      if (direction && in != *direction) continue;
      for (Direction out : kDirections) p += sm.probability(out, to, in, from);
    }
    return direction ? p : 0.5 * p;
  };

  MicroreversibilityResult out;
  const std::size_t n = spec.size();
  for (std::size_t i = 0; i < here.support.size(); ++i) {
    const double w = here.support[i];
    const double shifted = kinetic_energy - w;
    if (!(shifted > solver.settings().threshold_guard)) {
      out.skipped.push_back(w);
      continue;
    }
    // P(E_p - W, -W) = sum over e_j' - e_j = W of P_{j j'}(E_p - W + e_j') p_j'.
    double reverse = 0.0;
    bool skipped = false;
    for (std::size_t jp = 0; jp < n && !skipped; ++jp)
      for (std::size_t j = 0; j < n; ++j) {
        if (std::abs(spec.level(jp) - spec.level(j) - w) > tol) continue;
        try {
          reverse += prob(solver.solve(shifted + spec.level(jp)), j, jp) * th.populations[jp];
        } catch (const ThresholdError&) {
          skipped = true;
          break;
        }
      }
    if (skipped) {
      out.skipped.push_back(w);
      continue;
    }
    out.checked.push_back(w);
    out.residual =
        std::max(out.residual, std::abs(std::exp(-th.beta * w) * here.weights[i] - reverse));
  }
  return out;
}

double fermi(double x) { return 1.0 / (1.0 + std::exp(x)); }

double threshold_temperature(double delta) {
  if (!(delta > 0.0)) throw InvalidParameter("gap must be > 0");
  return std::log(2.0) / delta;
}

double extraction_ceiling(double beta, double delta) { return delta * fermi(beta * delta); }

double consumption_ceiling(double beta, double delta) {
  return delta * std::tanh(0.5 * beta * delta);
}

}  // namespace qscat
