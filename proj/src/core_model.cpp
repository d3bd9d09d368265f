#include "qscat/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace qscat {

std::string_view to_string(ProfileShape shape) {
  switch (shape) {
    case ProfileShape::cosine: return "cosine";
    case ProfileShape::flat: return "flat";
    case ProfileShape::tilted_cosine: return "tilted-cosine";
  }
  return "cosine";
}

ProfileShape parse_profile_shape(std::string_view name) {
  if (name == "cosine") return ProfileShape::cosine;
  if (name == "flat") return ProfileShape::flat;
  if (name == "tilted-cosine") return ProfileShape::tilted_cosine;
  throw InvalidParameter("unknown profile shape '" + std::string(name) + "'");
}

double PotentialProfile::shape_value(double x) const {
  if (std::abs(x) > 0.5 * a) return 0.0;
  const double c = 0.5 * std::numbers::pi * std::cos(std::numbers::pi * x / a);
  switch (shape) {
    case ProfileShape::cosine: return c;
    case ProfileShape::flat: return 1.0;
    case ProfileShape::tilted_cosine: return c * (1.0 + x / a);
  }
  return c;
}

std::string_view to_string(CouplingPattern pattern) {
  switch (pattern) {
    case CouplingPattern::pauli_x: return "pauli-x";
    case CouplingPattern::all_ones_offdiag: return "all-ones-offdiag";
  }
  return "all-ones-offdiag";
}

CouplingPattern parse_coupling_pattern(std::string_view name) {
  if (name == "pauli-x") return CouplingPattern::pauli_x;
  if (name == "all-ones-offdiag") return CouplingPattern::all_ones_offdiag;
  throw InvalidParameter("unknown coupling pattern '" + std::string(name) + "'");
}

Eigen::MatrixXd coupling_matrix(CouplingPattern pattern, std::size_t n) {
  if (pattern == CouplingPattern::pauli_x && n != 2)
    throw InvalidParameter("pauli-x coupling requires exactly two levels");
  const auto dim = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(dim, dim);
  w.diagonal().setZero();
  return w;
}

SystemSpec::SystemSpec(std::vector<double> levels, Eigen::MatrixXd coupling,
                       PotentialProfile profile, double mass, double hbar)
    : levels_(std::move(levels)),
      coupling_(std::move(coupling)),
      profile_(profile),
      mass_(mass),
      hbar_(hbar) {
  if (levels_.empty()) throw InvalidParameter("system needs at least one level");
  for (double e : levels_)
    if (!std::isfinite(e)) throw InvalidParameter("level energies must be finite");
  for (std::size_t j = 1; j < levels_.size(); ++j)
    if (!(levels_[j] > levels_[j - 1]))
      throw InvalidParameter("levels must be strictly increasing (non-degenerate)");
  const auto n = static_cast<Eigen::Index>(levels_.size());
  if (coupling_.rows() != n || coupling_.cols() != n)
    throw InvalidParameter("coupling matrix must be N x N");
  if (!coupling_.allFinite()) throw InvalidParameter("coupling matrix must be finite");
  if ((coupling_ - coupling_.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, coupling_.cwiseAbs().maxCoeff()))
    throw InvalidParameter("coupling matrix must be symmetric");
  if (!(profile_.V0 >= 0.0) || !std::isfinite(profile_.V0))
    throw InvalidParameter("V0 must be finite and >= 0");
  if (!(profile_.a > 0.0) || !std::isfinite(profile_.a))
    throw InvalidParameter("a must be finite and > 0");
  if (!(mass_ > 0.0) || !std::isfinite(mass_))
    throw InvalidParameter("mass must be finite and > 0");
  if (!(hbar_ > 0.0) || !std::isfinite(hbar_))
    throw InvalidParameter("hbar must be finite and > 0");
}

SystemSpec SystemSpec::ladder(std::size_t n, double delta, CouplingPattern pattern,
                              PotentialProfile profile, double mass, double hbar) {
  if (n == 0) throw InvalidParameter("ladder needs at least one level");
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw InvalidParameter("ladder spacing must be finite and > 0");
  std::vector<double> levels(n);
  const double centre = 0.5 * static_cast<double>(n - 1);
  for (std::size_t j = 0; j < n; ++j)
    levels[j] = (static_cast<double>(j) - centre) * delta;
  return SystemSpec(std::move(levels), coupling_matrix(pattern, n), profile, mass,
                    hbar);
}

Eigen::MatrixXd SystemSpec::channel_matrix(double x) const {
  Eigen::MatrixXd v = (profile_.V0 * profile_.shape_value(x)) * coupling_;
  v.diagonal() += Eigen::Map<const Eigen::VectorXd>(levels_.data(),
                                                    static_cast<Eigen::Index>(size()));
  return v;
}

Eigen::MatrixXd SystemSpec::system_hamiltonian() const {
  return Eigen::Map<const Eigen::VectorXd>(levels_.data(),
                                           static_cast<Eigen::Index>(size()))
      .asDiagonal();
}

bool SystemSpec::is_free() const {
  return profile_.V0 == 0.0 || coupling_.cwiseAbs().maxCoeff() == 0.0;
}

ThermalState thermal_state(const std::vector<double>& levels, double beta) {
  if (!std::isfinite(beta)) throw InvalidParameter("beta must be finite");
  if (beta < 0.0) throw InvalidParameter("beta must be >= 0");
  if (levels.empty()) throw InvalidParameter("no levels");
  ThermalState th;
  th.beta = beta;
  th.levels = levels;
  th.populations.resize(levels.size());
  // Shifted by the ground level so large beta cannot underflow the sum.
  const double e0 = *std::min_element(levels.begin(), levels.end());
  double sum = 0.0;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    th.populations[j] = std::exp(-beta * (levels[j] - e0));
    sum += th.populations[j];
  }
  for (double& p : th.populations) p /= sum;
  th.partition = std::exp(-beta * e0) * sum;
  return th;
}

ThermalState thermal_state(const SystemSpec& spec, double beta) {
  return thermal_state(spec.levels(), beta);
}

std::vector<double> GapStructure::signed_support() const {
  std::vector<double> support;
  support.reserve(2 * gaps.size() + 1);
  for (auto it = gaps.rbegin(); it != gaps.rend(); ++it) support.push_back(-*it);
  support.push_back(0.0);
  for (double g : gaps) support.push_back(g);
  return support;
}

std::size_t GapStructure::pair_count() const {
  std::size_t count = 0;
  for (const auto& bucket : pairs) count += bucket.size();
  return count;
}

GapStructure gap_structure(const std::vector<double>& levels, double beta,
                           double tolerance) {
  const ThermalState th = thermal_state(levels, beta);
  GapStructure gs;
  gs.beta = beta;
  gs.tolerance = tolerance;
  gs.partition = th.partition;

  struct Raw {
    double gap;
    std::size_t upper, lower;
  };
  std::vector<Raw> raw;
  for (std::size_t up = 0; up < levels.size(); ++up)
    for (std::size_t lo = 0; lo < levels.size(); ++lo)
      if (levels[up] > levels[lo]) raw.push_back({levels[up] - levels[lo], up, lo});
  std::stable_sort(raw.begin(), raw.end(),
                   [](const Raw& x, const Raw& y) { return x.gap < y.gap; });

  // Bucket representative is the first (smallest) member.
  for (const Raw& r : raw) {
    if (gs.gaps.empty() || r.gap - gs.gaps.back() > tolerance) {
      gs.gaps.push_back(r.gap);
      gs.pairs.emplace_back();
    }
    const double z = std::exp(-beta * levels[r.upper]) + std::exp(-beta * levels[r.lower]);
    gs.pairs.back().push_back({r.upper, r.lower, z});
  }
  for (auto& bucket : gs.pairs)
    std::sort(bucket.begin(), bucket.end(), [](const LevelPair& x, const LevelPair& y) {
      return x.lower < y.lower;
    });
  return gs;
}

GapStructure gap_structure(const SystemSpec& spec, double beta, double tolerance) {
  return gap_structure(spec.levels(), beta, tolerance);
}

std::optional<std::size_t> find_support_index(const std::vector<double>& support,
                                              double value, double tolerance) {
  auto it = std::lower_bound(support.begin(), support.end(), value - tolerance);
  if (it != support.end() && std::abs(*it - value) <= tolerance)
    return static_cast<std::size_t>(it - support.begin());
  return std::nullopt;
}

std::size_t ChannelBasis::n_open() const {
  return static_cast<std::size_t>(std::count(open.begin(), open.end(), true));
}

std::vector<std::size_t> ChannelBasis::open_levels() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < open.size(); ++j)
    if (open[j]) out.push_back(j);
  return out;
}

ChannelBasis channel_basis(const SystemSpec& spec, double energy) {
  if (!std::isfinite(energy)) throw InvalidParameter("total energy must be finite");
  ChannelBasis cb;
  cb.energy = energy;
  const std::size_t n = spec.size();
  cb.open.assign(n, false);
  cb.k.assign(n, 0.0);
  cb.kappa.assign(n, 0.0);
  const double scale = 2.0 * spec.mass();
  for (std::size_t j = 0; j < n; ++j) {
    const double excess = energy - spec.level(j);
    if (excess > 0.0) {
      cb.open[j] = true;
      cb.k[j] = std::sqrt(scale * excess) / spec.hbar();
    } else {
      cb.kappa[j] = std::sqrt(-scale * excess) / spec.hbar();
    }
  }
  return cb;
}

}  // namespace qscat
