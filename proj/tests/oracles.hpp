#pragma once

// Test-only reference computations. Nothing here calls into the solver or
// the statistics code it is used to check.

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Transmission probability through a rectangular barrier of height v0 and
// width a for a particle of kinetic energy e (textbook closed form).
inline double square_barrier_transmission(double v0, double a, double mass, double hbar,
                                          double e) {
  if (v0 == 0.0) return 1.0;
  const double s = 2.0 * mass / (hbar * hbar);
  if (e < v0) {
    const double kappa = std::sqrt(s * (v0 - e));
    const double sh = std::sinh(kappa * a);
    return 1.0 / (1.0 + v0 * v0 * sh * sh / (4.0 * e * (v0 - e)));
  }
  if (e > v0) {
    const double q = std::sqrt(s * (e - v0));
    const double sn = std::sin(q * a);
    return 1.0 / (1.0 + v0 * v0 * sn * sn / (4.0 * e * (e - v0)));
  }
  return 1.0 / (1.0 + mass * a * a * v0 / (2.0 * hbar * hbar));
}

// Forward energy-change masses by explicit double sum over level pairs:
// mass(W) = sum_{j',j : e_j' - e_j = W} P[j'][j] p_j. Keys rounded to 1e-9.
inline std::map<long long, double> brute_forward(const std::vector<double>& levels,
                                                 const Eigen::MatrixXd& p_trans,
                                                 double beta) {
  const std::size_t n = levels.size();
  std::vector<double> pop(n);
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) z += std::exp(-beta * levels[j]);
  for (std::size_t j = 0; j < n; ++j) pop[j] = std::exp(-beta * levels[j]) / z;
  std::map<long long, double> out;
  for (std::size_t jp = 0; jp < n; ++jp)
    for (std::size_t j = 0; j < n; ++j) {
      const auto key = std::llround((levels[jp] - levels[j]) * 1e9);
      out[key] += p_trans(static_cast<Eigen::Index>(jp), static_cast<Eigen::Index>(j)) * pop[j];
    }
  return out;
}

// Dual masses keyed by the dual's own argument y = e_j - e_j':
// mass(y) = sum p_j' P[j'][j].
inline std::map<long long, double> brute_dual(const std::vector<double>& levels,
                                              const Eigen::MatrixXd& p_trans, double beta) {
  const std::size_t n = levels.size();
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) z += std::exp(-beta * levels[j]);
  std::map<long long, double> out;
  for (std::size_t jp = 0; jp < n; ++jp)
    for (std::size_t j = 0; j < n; ++j) {
      const auto key = std::llround((levels[j] - levels[jp]) * 1e9);
      out[key] += std::exp(-beta * levels[jp]) / z *
                  p_trans(static_cast<Eigen::Index>(jp), static_cast<Eigen::Index>(j));
    }
  return out;
}

inline double fermi(double x) { return 1.0 / (1.0 + std::exp(x)); }

}  // namespace oracle
