#include "qscat/cc_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

namespace qscat {

namespace {

using cd = std::complex<double>;
constexpr cd kI{0.0, 1.0};

// Smallest reciprocal condition accepted when inverting a matching matrix.
constexpr double kMinRcond = 1e-13;

Eigen::MatrixXcd identity_c(Eigen::Index n) { return Eigen::MatrixXcd::Identity(n, n); }

// Interface between two uncoupled media with per-channel wavenumbers
// q_left, q_right (amplitude basis).
LayerSMatrix interface_layer(const Eigen::VectorXcd& q_left,
                             const Eigen::VectorXcd& q_right, double x, double q_ref) {
  const Eigen::Index n = q_left.size();
  LayerSMatrix out;
  out.x_left = out.x_right = x;
  out.q_ref = q_ref;
  out.r_left = Eigen::MatrixXcd::Zero(n, n);
  out.t_lr = Eigen::MatrixXcd::Zero(n, n);
  out.t_rl = Eigen::MatrixXcd::Zero(n, n);
  out.r_right = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const cd sum = q_left(j) + q_right(j);
    out.r_left(j, j) = (q_left(j) - q_right(j)) / sum;
    out.t_lr(j, j) = 2.0 * q_left(j) / sum;
    out.t_rl(j, j) = 2.0 * q_right(j) / sum;
    out.r_right(j, j) = (q_right(j) - q_left(j)) / sum;
  }
  return out;
}

// Physical exterior wavenumbers: k_j for open channels, i kappa_j for closed.
Eigen::VectorXcd exterior_wavenumbers(const ChannelBasis& cb) {
  Eigen::VectorXcd q(static_cast<Eigen::Index>(cb.open.size()));
  for (std::size_t j = 0; j < cb.open.size(); ++j)
    q(static_cast<Eigen::Index>(j)) = cb.open[j] ? cd(cb.k[j], 0.0) : cd(0.0, cb.kappa[j]);
  return q;
}

// Converts a real transfer matrix (psi, psi') over [x0, x1] to reference-basis
// scattering data.
LayerSMatrix transfer_to_layer(const Eigen::MatrixXd& t, double q, double x0, double x1,
                               std::size_t index) {
  const Eigen::Index n = t.rows() / 2;
  const Eigen::MatrixXd t11 = t.topLeftCorner(n, n);
  const Eigen::MatrixXd t12 = t.topRightCorner(n, n);
  const Eigen::MatrixXd t21 = t.bottomLeftCorner(n, n);
  const Eigen::MatrixXd t22 = t.bottomRightCorner(n, n);
  const Eigen::MatrixXd sum = t11 + t22;
  const Eigen::MatrixXd diff = t11 - t22;
  const Eigen::MatrixXd odd = q * t12 - t21 / q;
  const Eigen::MatrixXd even = q * t12 + t21 / q;
  const Eigen::MatrixXcd m11 = 0.5 * (sum.cast<cd>() + kI * odd.cast<cd>());
  const Eigen::MatrixXcd m12 = 0.5 * (diff.cast<cd>() - kI * even.cast<cd>());
  const Eigen::MatrixXcd m21 = 0.5 * (diff.cast<cd>() + kI * even.cast<cd>());
  const Eigen::MatrixXcd m22 = 0.5 * (sum.cast<cd>() - kI * odd.cast<cd>());

  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m22);
  const double rc = lu.rcond();
  if (!(rc > kMinRcond)) throw CompositionError(index, rc);
  const Eigen::MatrixXcd m22_inv = lu.inverse();

  LayerSMatrix out;
  out.x_left = x0;
  out.x_right = x1;
  out.q_ref = q;
  out.r_left = -m22_inv * m21;
  out.t_rl = m22_inv;
  out.t_lr = m11 - m12 * m22_inv * m21;
  out.r_right = m12 * m22_inv;
  return out;
}

// Open-channel extraction shared by the solver and the flat oracle: takes
// amplitude-basis blocks referenced at x_left / x_right, moves the plane-wave
// reference to x = 0 and applies the flux factors sqrt(k_out / k_in).
ScatteringMatrixE normalize_open(const ChannelBasis& cb, const Eigen::MatrixXcd& r_left,
                                 const Eigen::MatrixXcd& t_lr, const Eigen::MatrixXcd& t_rl,
                                 const Eigen::MatrixXcd& r_right, double x_left,
                                 double x_right) {
  ScatteringMatrixE sm;
  sm.energy = cb.energy;
  sm.open = cb.open_levels();
  const auto n = static_cast<Eigen::Index>(sm.open.size());
  sm.s = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  for (Eigen::Index out = 0; out < n; ++out) {
    const auto jo = sm.open[static_cast<std::size_t>(out)];
    const double ko = cb.k[jo];
    const cd out_left = std::exp(kI * (ko * x_left));
    const cd out_right = std::exp(-kI * (ko * x_right));
    for (Eigen::Index in = 0; in < n; ++in) {
      const auto ji = sm.open[static_cast<std::size_t>(in)];
      const double ki = cb.k[ji];
      const cd in_left = std::exp(kI * (ki * x_left));
      const cd in_right = std::exp(-kI * (ki * x_right));
      const double flux = std::sqrt(ko / ki);
      const auto ro = static_cast<Eigen::Index>(jo);
      const auto ci = static_cast<Eigen::Index>(ji);
      // Incoming plus enters on the left; outgoing plus leaves on the right.
      sm.s(out, in) = flux * out_right * t_lr(ro, ci) * in_left;               // ++
      sm.s(n + out, in) = flux * out_left * r_left(ro, ci) * in_left;          // -+
      sm.s(n + out, n + in) = flux * out_left * t_rl(ro, ci) * in_right;       // --
      sm.s(out, n + in) = flux * out_right * r_right(ro, ci) * in_right;       // +-
    }
  }
  return sm;
}

void check_total_energy(const SystemSpec& spec, double energy, double guard) {
  if (!std::isfinite(energy)) throw InvalidParameter("total energy must be finite");
  if (!(energy > spec.level(0))) throw NoOpenChannels(energy);
  for (std::size_t j = 0; j < spec.size(); ++j)
    if (std::abs(energy - spec.level(j)) < guard) throw ThresholdError(energy, j);
}

}  // namespace

const char* to_string(Direction d) { return d == Direction::plus ? "+" : "-"; }

const char* to_string(SliceScheme scheme) {
  return scheme == SliceScheme::magnus4 ? "magnus4" : "midpoint";
}

SliceScheme parse_slice_scheme(std::string_view name) {
  if (name == "magnus4") return SliceScheme::magnus4;
  if (name == "midpoint") return SliceScheme::midpoint;
  throw InvalidParameter("unknown slice scheme '" + std::string(name) + "'");
}

SliceGrid build_grid(const SystemSpec& spec, std::size_t slices) {
  if (slices == 0) throw InvalidParameter("slice count must be >= 1");
  SliceGrid g;
  const double a = spec.profile().a;
  g.x_min = -0.5 * a;
  g.x_max = 0.5 * a;
  g.edges.resize(slices + 1);
  for (std::size_t i = 0; i <= slices; ++i)
    g.edges[i] = g.x_min + a * static_cast<double>(i) / static_cast<double>(slices);
  g.edges.back() = g.x_max;

  const double gauss = std::sqrt(3.0) / 6.0;
  g.midpoint.reserve(slices);
  g.eigenvalue_min = std::numeric_limits<double>::infinity();
  g.eigenvalue_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < slices; ++i) {
    const double x0 = g.edges[i];
    const double h = g.edges[i + 1] - x0;
    g.midpoint.push_back(spec.channel_matrix(x0 + 0.5 * h));
    g.gauss_lo.push_back(spec.channel_matrix(x0 + (0.5 - gauss) * h));
    g.gauss_hi.push_back(spec.channel_matrix(x0 + (0.5 + gauss) * h));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.midpoint.back());
    g.midpoint_eigenvalues.push_back(es.eigenvalues());
    g.midpoint_eigenvectors.push_back(es.eigenvectors());
    for (const auto* m : {&g.gauss_lo.back(), &g.gauss_hi.back()}) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(*m, Eigen::EigenvaluesOnly);
      g.eigenvalue_min = std::min(g.eigenvalue_min, eg.eigenvalues().minCoeff());
      g.eigenvalue_max = std::max(g.eigenvalue_max, eg.eigenvalues().maxCoeff());
    }
    g.eigenvalue_min = std::min(g.eigenvalue_min, es.eigenvalues().minCoeff());
    g.eigenvalue_max = std::max(g.eigenvalue_max, es.eigenvalues().maxCoeff());
  }
  return g;
}

LayerSMatrix LayerSMatrix::identity(std::size_t channels, double x, double q_ref) {
  const auto n = static_cast<Eigen::Index>(channels);
  LayerSMatrix id;
  id.x_left = id.x_right = x;
  id.q_ref = q_ref;
  id.r_left = Eigen::MatrixXcd::Zero(n, n);
  id.r_right = Eigen::MatrixXcd::Zero(n, n);
  id.t_lr = identity_c(n);
  id.t_rl = identity_c(n);
  return id;
}

Eigen::MatrixXcd LayerSMatrix::full() const {
  const Eigen::Index n = channels();
  Eigen::MatrixXcd s(2 * n, 2 * n);
  s << r_left, t_rl, t_lr, r_right;
  return s;
}

LayerSMatrix compose(const LayerSMatrix& left, const LayerSMatrix& right,
                     std::size_t index) {
  const Eigen::Index n = left.channels();
  if (right.channels() != n) throw InvalidParameter("compose: channel counts differ");
  if (left.q_ref != right.q_ref) throw InvalidParameter("compose: reference bases differ");
  const double scale = std::max({1.0, std::abs(left.x_right), std::abs(right.x_left)});
  if (std::abs(left.x_right - right.x_left) > 1e-12 * scale)
    throw InvalidParameter("compose: segments are not adjacent");

  // X = (I - B11 A22)^{-1}; (I - A22 B11)^{-1} = I + A22 X B11.
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(identity_c(n) - right.r_left * left.r_right);
  const double rc = lu.rcond();
  if (!(rc > kMinRcond)) throw CompositionError(index, rc);
  const Eigen::MatrixXcd x = lu.inverse();
  const Eigen::MatrixXcd inner = identity_c(n) + left.r_right * x * right.r_left;

  LayerSMatrix out;
  out.x_left = left.x_left;
  out.x_right = right.x_right;
  out.q_ref = left.q_ref;
  out.r_left = left.r_left + left.t_rl * x * right.r_left * left.t_lr;
  out.t_rl = left.t_rl * x * right.t_rl;
  out.t_lr = right.t_lr * inner * left.t_lr;
  out.r_right = right.r_right + right.t_lr * left.r_right * x * right.t_rl;
  return out;
}

bool ScatteringMatrixE::is_open(std::size_t level) const {
  return std::find(open.begin(), open.end(), level) != open.end();
}

Eigen::Index ScatteringMatrixE::index(Direction d, std::size_t level) const {
  const auto it = std::find(open.begin(), open.end(), level);
  if (it == open.end()) throw InvalidParameter("channel " + std::to_string(level) + " is closed");
  return static_cast<Eigen::Index>(direction_index(d) * static_cast<int>(open.size()) +
                                   (it - open.begin()));
}

std::complex<double> ScatteringMatrixE::amplitude(Direction out, std::size_t j_out,
                                                  Direction in, std::size_t j_in) const {
  if (!is_open(j_out) || !is_open(j_in)) return {0.0, 0.0};
  return s(index(out, j_out), index(in, j_in));
}

double unitarity_residual(const ScatteringMatrixE& sm) {
  const Eigen::Index n = sm.s.rows();
  const Eigen::MatrixXcd id = identity_c(n);
  const double a = (sm.s.adjoint() * sm.s - id).cwiseAbs().maxCoeff();
  const double b = (sm.s * sm.s.adjoint() - id).cwiseAbs().maxCoeff();
  return std::max(a, b);
}

double bistochasticity_residual(const ScatteringMatrixE& sm) {
  const Eigen::MatrixXd p = sm.s.cwiseAbs2();
  const double rows = (p.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double cols = (p.colwise().sum().array() - 1.0).abs().maxCoeff();
  return std::max(rows, cols);
}

double time_reversal_residual(const ScatteringMatrixE& sm) {
  double worst = 0.0;
  for (Direction out : kDirections)
    for (Direction in : kDirections)
      for (std::size_t jo : sm.open)
        for (std::size_t ji : sm.open)
          worst = std::max(worst, std::abs(sm.amplitude(out, jo, in, ji) -
                                           sm.amplitude(flip(in), ji, flip(out), jo)));
  return worst;
}

double mirror_symmetry_residual(const ScatteringMatrixE& sm) {
  double worst = 0.0;
  for (Direction out : kDirections)
    for (Direction in : kDirections)
      for (std::size_t jo : sm.open)
        for (std::size_t ji : sm.open)
          worst = std::max(worst, std::abs(sm.probability(out, jo, in, ji) -
                                           sm.probability(flip(out), jo, flip(in), ji)));
  return worst;
}

double max_entry_difference(const ScatteringMatrixE& x, const ScatteringMatrixE& y) {
  if (x.open != y.open) throw SpecMismatch("open channel sets differ");
  return (x.s - y.s).cwiseAbs().maxCoeff();
}

ScatteringSolver::ScatteringSolver(SystemSpec spec, SolverSettings settings)
    : spec_(std::move(spec)), settings_(settings), grid_(build_grid(spec_, settings.slices)) {
  if (!(settings_.threshold_guard >= 0.0))
    throw InvalidParameter("threshold guard must be >= 0");
  if (!(settings_.gap_tolerance > 0.0)) throw InvalidParameter("gap tolerance must be > 0");
}

void ScatteringSolver::check_energy(double energy) const {
  check_total_energy(spec_, energy, settings_.threshold_guard);
}

double ScatteringSolver::reference_wavenumber(double energy) const {
  const double spread = std::max(std::abs(energy - grid_.eigenvalue_min),
                                 std::abs(energy - grid_.eigenvalue_max));
  const double q = std::sqrt(2.0 * spec_.mass() * spread) / spec_.hbar();
  return std::max(q, std::numbers::pi / spec_.profile().a);
}

Eigen::MatrixXd ScatteringSolver::slice_transfer(std::size_t i, double energy) const {
  const auto n = static_cast<Eigen::Index>(spec_.size());
  const double h = grid_.width(i);
  const double scale = 2.0 * spec_.mass() / (spec_.hbar() * spec_.hbar());
  Eigen::MatrixXd t(2 * n, 2 * n);

  if (settings_.scheme == SliceScheme::magnus4) {
    // y = (psi, psi'), y' = A(x) y with A = [[0, I], [Q(x), 0]],
    // Q = (2m/hbar^2)(V - E). Omega = h/2 (A1 + A2) + sqrt(3) h^2 / 12 [A2, A1].
    Eigen::MatrixXd q1 = scale * grid_.gauss_lo[i];
    Eigen::MatrixXd q2 = scale * grid_.gauss_hi[i];
    q1.diagonal().array() -= scale * energy;
    q2.diagonal().array() -= scale * energy;
    const double c = std::sqrt(3.0) * h * h / 12.0;
    Eigen::MatrixXd omega(2 * n, 2 * n);
    omega.topLeftCorner(n, n) = c * (q1 - q2);
    omega.topRightCorner(n, n) = h * Eigen::MatrixXd::Identity(n, n);
    omega.bottomLeftCorner(n, n) = 0.5 * h * (q1 + q2);
    omega.bottomRightCorner(n, n) = c * (q2 - q1);
    t = omega.exp();
    return t;
  }

  const Eigen::VectorXd& lambda = grid_.midpoint_eigenvalues[i];
  const Eigen::MatrixXd& u = grid_.midpoint_eigenvectors[i];
  Eigen::VectorXd cosine(n), sinc(n), deriv(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const double q2 = scale * (energy - lambda(c));
    const double q = std::sqrt(std::abs(q2));
    const double qh = q * h;
    if (qh < 1e-8) {
      cosine(c) = 1.0;
      sinc(c) = h;
    } else if (q2 > 0.0) {
      cosine(c) = std::cos(qh);
      sinc(c) = std::sin(qh) / q;
    } else {
      cosine(c) = std::cosh(qh);
      sinc(c) = std::sinh(qh) / q;
    }
    deriv(c) = -q2 * sinc(c);
  }
  t.topLeftCorner(n, n) = u * cosine.asDiagonal() * u.transpose();
  t.topRightCorner(n, n) = u * sinc.asDiagonal() * u.transpose();
  t.bottomLeftCorner(n, n) = u * deriv.asDiagonal() * u.transpose();
  t.bottomRightCorner(n, n) = t.topLeftCorner(n, n);
  return t;
}

LayerSMatrix ScatteringSolver::segment(double energy, double q_ref, std::size_t first,
                                       std::size_t last) const {
  if (first > last || last > grid_.size())
    throw InvalidParameter("segment: slice range out of bounds");
  const auto n = static_cast<Eigen::Index>(spec_.size());
  LayerSMatrix acc = LayerSMatrix::identity(spec_.size(), grid_.edges[first], q_ref);

  // Consecutive slices are multiplied as transfer matrices while the largest
  // evanescent growth over the group stays below e.
  const double kappa_max =
      std::sqrt(2.0 * spec_.mass() * std::max(0.0, grid_.eigenvalue_max - energy)) /
      spec_.hbar();
  const double h = (grid_.x_max - grid_.x_min) / static_cast<double>(grid_.size());
  const auto group = static_cast<std::size_t>(
      std::clamp(1.0 / (kappa_max * h + 1e-300), 1.0, 1e6));

  std::size_t i = first;
  while (i < last) {
    const std::size_t start = i;
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    for (std::size_t c = 0; c < group && i < last; ++c, ++i) t = slice_transfer(i, energy) * t;
    acc = compose(acc, transfer_to_layer(t, q_ref, grid_.edges[start], grid_.edges[i], start),
                  start);
  }
  return acc;
}

ScatteringMatrixE to_physical(const LayerSMatrix& layer, const SystemSpec& spec,
                              double energy) {
  const ChannelBasis cb = channel_basis(spec, energy);
  if (!cb.has_open()) throw NoOpenChannels(energy);
  const Eigen::VectorXcd q_phys = exterior_wavenumbers(cb);
  const Eigen::VectorXcd q_ref = Eigen::VectorXcd::Constant(q_phys.size(), layer.q_ref);
  const LayerSMatrix left = interface_layer(q_phys, q_ref, layer.x_left, layer.q_ref);
  const LayerSMatrix right = interface_layer(q_ref, q_phys, layer.x_right, layer.q_ref);
  const LayerSMatrix total = compose(compose(left, layer, 0), right, 0);
  return normalize_open(cb, total.r_left, total.t_lr, total.t_rl, total.r_right,
                        layer.x_left, layer.x_right);
}

ScatteringMatrixE ScatteringSolver::compute(double energy) const {
  const double q_ref = reference_wavenumber(energy);
  return to_physical(segment(energy, q_ref, 0, grid_.size()), spec_, energy);
}

ScatteringMatrixE ScatteringSolver::solve(double energy) const {
  check_energy(energy);
  const auto key = std::llround(energy / settings_.gap_tolerance);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  ScatteringMatrixE result = compute(energy);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(key, std::move(result)).first->second;
}

std::size_t ScatteringSolver::cache_size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.size();
}

ScatteringMatrixE solve_smatrix(const SystemSpec& spec, double energy, std::size_t slices) {
  SolverSettings settings;
  settings.slices = slices;
  return ScatteringSolver(spec, settings).solve(energy);
}

ScatteringMatrixE flat_barrier_oracle(const SystemSpec& spec, double energy,
                                      double threshold_guard) {
  if (spec.profile().shape != ProfileShape::flat)
    throw InvalidParameter("flat barrier oracle requires the flat profile");
  check_total_energy(spec, energy, threshold_guard);
  const ChannelBasis cb = channel_basis(spec, energy);
  const auto n = static_cast<Eigen::Index>(spec.size());
  const double a = spec.profile().a;
  const double xl = -0.5 * a;
  const double xr = 0.5 * a;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spec.channel_matrix(0.0));
  const Eigen::MatrixXcd u = es.eigenvectors().cast<cd>();
  Eigen::VectorXcd q(n);
  for (Eigen::Index c = 0; c < n; ++c)
    q(c) = std::sqrt(cd(2.0 * spec.mass() * (energy - es.eigenvalues()(c)), 0.0)) / spec.hbar();
  const Eigen::MatrixXcd p = (kI * q * a).array().exp().matrix().asDiagonal();
  const Eigen::MatrixXcd uq = u * q.asDiagonal();
  const Eigen::MatrixXcd k = exterior_wavenumbers(cb).asDiagonal();
  const Eigen::MatrixXcd id = identity_c(n);

  // Unknowns (b_L, c+, c-, a_R); inner field U[e^{iq(x-xl)} c+ + e^{-iq(x-xr)} c-].
  Eigen::MatrixXcd sys = Eigen::MatrixXcd::Zero(4 * n, 4 * n);
  sys.block(0, 0, n, n) = id;
  sys.block(0, n, n, n) = -u;
  sys.block(0, 2 * n, n, n) = -u * p;
  sys.block(n, 0, n, n) = -kI * k;
  sys.block(n, n, n, n) = -kI * uq;
  sys.block(n, 2 * n, n, n) = kI * uq * p;
  sys.block(2 * n, n, n, n) = -u * p;
  sys.block(2 * n, 2 * n, n, n) = -u;
  sys.block(2 * n, 3 * n, n, n) = id;
  sys.block(3 * n, n, n, n) = -kI * uq * p;
  sys.block(3 * n, 2 * n, n, n) = kI * uq;
  sys.block(3 * n, 3 * n, n, n) = kI * k;

  // Right-hand sides: a_L = e_j (columns 0..n-1) and b_R = e_j (n..2n-1).
  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(4 * n, 2 * n);
  rhs.block(0, 0, n, n) = -id;
  rhs.block(n, 0, n, n) = -kI * k;
  rhs.block(2 * n, n, n, n) = -id;
  rhs.block(3 * n, n, n, n) = kI * k;

  const Eigen::MatrixXcd x = sys.fullPivLu().solve(rhs);
  return normalize_open(cb, x.block(0, 0, n, n), x.block(3 * n, 0, n, n),
                        x.block(0, n, n, n), x.block(3 * n, n, n, n), xl, xr);
}

}  // namespace qscat
