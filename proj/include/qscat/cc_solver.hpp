#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "qscat/core_model.hpp"

namespace qscat {

// Direction of travel of the particle: plus means p > 0, i.e. incident from
// x -> -infinity or outgoing towards x -> +infinity.
enum class Direction { plus, minus };

constexpr Direction flip(Direction d) {
  return d == Direction::plus ? Direction::minus : Direction::plus;
}
constexpr int direction_index(Direction d) { return d == Direction::plus ? 0 : 1; }
inline constexpr Direction kDirections[2] = {Direction::plus, Direction::minus};
const char* to_string(Direction d);

// How the channel equation is integrated across one slice.
//   magnus4   fourth-order Magnus step with two Gauss samples per slice
//   midpoint  potential frozen at the slice midpoint, solved exactly in the
//             eigenbasis of the slice channel matrix (second order)
enum class SliceScheme { magnus4, midpoint };

const char* to_string(SliceScheme scheme);
SliceScheme parse_slice_scheme(std::string_view name);

struct SolverSettings {
  std::size_t slices = 2000;
  double threshold_guard = 1e-8;
  SliceScheme scheme = SliceScheme::magnus4;
  double gap_tolerance = kDefaultGapTolerance;
};

// Uniform slicing of the support [-a/2, a/2]. Channel matrices are
// diag(e) + V0 v(x) W sampled at the slice midpoints and at the two Gauss
// points used by the Magnus step.
struct SliceGrid {
  double x_min = 0.0;
  double x_max = 0.0;
  std::vector<double> edges;  // size() + 1 entries
  std::vector<Eigen::MatrixXd> midpoint;
  std::vector<Eigen::VectorXd> midpoint_eigenvalues;
  std::vector<Eigen::MatrixXd> midpoint_eigenvectors;
  std::vector<Eigen::MatrixXd> gauss_lo;
  std::vector<Eigen::MatrixXd> gauss_hi;
  double eigenvalue_min = 0.0;
  double eigenvalue_max = 0.0;

  std::size_t size() const { return midpoint.size(); }
  double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
};

SliceGrid build_grid(const SystemSpec& spec, std::size_t slices);

// Scattering data of a segment [x_left, x_right], expressed in a reference
// basis where every channel propagates with the same wavenumber q_ref.
// Amplitudes are referenced at the segment edges, so the matrix is unitary
// for any real potential and composition never meets growing exponentials.
struct LayerSMatrix {
  double x_left = 0.0;
  double x_right = 0.0;
  double q_ref = 1.0;
  Eigen::MatrixXcd r_left;   // left in  -> left out
  Eigen::MatrixXcd t_lr;     // left in  -> right out
  Eigen::MatrixXcd t_rl;     // right in -> left out
  Eigen::MatrixXcd r_right;  // right in -> right out

  static LayerSMatrix identity(std::size_t channels, double x, double q_ref);
  Eigen::Index channels() const { return r_left.rows(); }
  Eigen::MatrixXcd full() const;
};

// Star product of adjacent segments (left occupies the smaller x).
// Throws CompositionError(index) if the interface matching is singular.
LayerSMatrix compose(const LayerSMatrix& left, const LayerSMatrix& right,
                     std::size_t index = 0);

// Energy-normalized scattering matrix over the open channels at total energy
// E. Row index (alpha', j'), column index (alpha, j), with
// index(alpha, j) = direction_index(alpha) * n_open + position of j in open.
struct ScatteringMatrixE {
  double energy = 0.0;
  std::vector<std::size_t> open;
  Eigen::MatrixXcd s;

  std::size_t n_open() const { return open.size(); }
  bool is_open(std::size_t level) const;
  Eigen::Index index(Direction d, std::size_t level) const;
  // s^{out,in}_{j'j}; zero when either channel is closed.
  std::complex<double> amplitude(Direction out, std::size_t j_out, Direction in,
                                 std::size_t j_in) const;
  double probability(Direction out, std::size_t j_out, Direction in,
                     std::size_t j_in) const {
    return std::norm(amplitude(out, j_out, in, j_in));
  }
};

// max(|s^+ s - I|, |s s^+ - I|) entrywise.
double unitarity_residual(const ScatteringMatrixE& sm);
// Row and column sums of |s|^2 against 1.
double bistochasticity_residual(const ScatteringMatrixE& sm);
// max |s^{a'a}_{j'j} - s^{-a,-a'}_{jj'}|.
double time_reversal_residual(const ScatteringMatrixE& sm);
// max |P^{a'a}_{j'j} - P^{-a',-a}_{j'j}|; vanishes for mirror-symmetric V.
double mirror_symmetry_residual(const ScatteringMatrixE& sm);
// Largest entrywise change between two matrices over the same open set.
double max_entry_difference(const ScatteringMatrixE& x, const ScatteringMatrixE& y);

// Solver for one SystemSpec. The slice grid is built once; solve() is
// thread-safe and memoizes results keyed by the total energy rounded to the
// gap tolerance.
class ScatteringSolver {
 public:
  explicit ScatteringSolver(SystemSpec spec, SolverSettings settings = {});

  const SystemSpec& spec() const { return spec_; }
  const SolverSettings& settings() const { return settings_; }
  const SliceGrid& grid() const { return grid_; }

  ScatteringMatrixE solve(double energy) const;

  // Reference-basis scattering data of slices [first, last).
  LayerSMatrix segment(double energy, double q_ref, std::size_t first,
                       std::size_t last) const;
  double reference_wavenumber(double energy) const;

  // Throws NoOpenChannels / ThresholdError for energies the solver rejects.
  void check_energy(double energy) const;

  std::size_t cache_size() const;

 private:
  ScatteringMatrixE compute(double energy) const;
  Eigen::MatrixXd slice_transfer(std::size_t i, double energy) const;

  SystemSpec spec_;
  SolverSettings settings_;
  SliceGrid grid_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<long long, ScatteringMatrixE> cache_;
};

ScatteringMatrixE solve_smatrix(const SystemSpec& spec, double energy,
                                std::size_t slices = SolverSettings{}.slices);

// Attach the physical exterior (free levels) to reference-basis data and
// return the energy-normalized open-channel matrix with plane waves
// referenced at x = 0.
ScatteringMatrixE to_physical(const LayerSMatrix& layer, const SystemSpec& spec,
                              double energy);

// Independent closed-form solution for a piecewise-flat profile: one
// diagonalization of the constant channel matrix, plane waves matched at both
// interfaces in a single linear system.
ScatteringMatrixE flat_barrier_oracle(const SystemSpec& spec, double energy,
                                      double threshold_guard = 1e-8);

}  // namespace qscat
