#include "qscat/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "qscat/generic_map.hpp"
#include "qscat/parallel.hpp"
#include "qscat/thermal_ensemble.hpp"

namespace qscat {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string output_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output.dir);
  return (std::filesystem::path(cfg.output.dir) / (cfg.output.prefix + name)).string();
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << body;
}

std::string header(const std::string& command, const RunConfig& cfg) {
  std::string h = "# qscat " + command + "\n";
  h += "# config_hash=" + config_hash(cfg) + "\n";
  h += "# config=" + hashed_config(cfg).dump() + "\n";
  return h;
}

std::string clean(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + format_double(xs[i]);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out(1);
  for (char c : line) {
    if (c == ',')
      out.emplace_back();
    else
      out.back() += c;
  }
  return out;
}

std::string p_header(std::size_t n) {
  std::string h;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) h += ",P_" + std::to_string(a) + "_" + std::to_string(b);
  return h;
}

std::string p_cells(const Eigen::MatrixXd& p, std::size_t n) {
  std::string out;
  for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(n); ++a)
    for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(n); ++b)
      out += "," + format_double(p.size() ? p(a, b) : std::nan(""));
  return out;
}

// First E where the series changes sign, by linear interpolation.
std::optional<double> first_sign_change(const std::vector<double>& e, const std::vector<double>& w) {
  for (std::size_t i = 1; i < e.size(); ++i) {
    if (!std::isfinite(w[i - 1]) || !std::isfinite(w[i])) continue;
    if ((w[i - 1] < 0.0 && w[i] >= 0.0) || (w[i - 1] > 0.0 && w[i] <= 0.0)) {
      const double t = w[i - 1] / (w[i - 1] - w[i]);
      return e[i - 1] + t * (e[i] - e[i - 1]);
    }
  }
  return std::nullopt;
}

json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

// Centered moving average over the points within half a window.
std::vector<double> window_average(const std::vector<double>& e, const std::vector<double>& v,
                                   double window) {
  std::vector<double> out(e.size(), std::nan(""));
  for (std::size_t i = 0; i < e.size(); ++i) {
    double sum = 0.0;
    std::size_t k = 0;
    for (std::size_t j = 0; j < e.size(); ++j)
      if (std::abs(e[j] - e[i]) <= 0.5 * window && std::isfinite(v[j])) {
        sum += v[j];
        ++k;
      }
    if (k) out[i] = sum / static_cast<double>(k);
  }
  return out;
}

std::string format_short(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

RunConfig figure_model(const RunConfig& cfg, std::size_t n) {
  RunConfig out = cfg;
  out.system.levels.clear();
  out.system.n = n;
  out.system.coupling_matrix.clear();
  if (n == 1) {
    out.system.coupling = "explicit";
    out.system.coupling_matrix = {{1.0}};
  } else {
    out.system.coupling = n == 2 ? "pauli-x" : "all-ones-offdiag";
  }
  return out;
}

std::vector<SweepPoint> evaluate_points(const ScatteringSolver& solver, double beta,
                                        const std::vector<double>& kinetic_energies,
                                        std::size_t threads) {
  const ThermalState th = thermal_state(solver.spec(), beta);
  const GapStructure gs = gap_structure(solver.spec(), beta, solver.settings().gap_tolerance);
  std::vector<SweepPoint> points(kinetic_energies.size());
  parallel_for(points.size(), threads, [&](std::size_t i) {
    SweepPoint& pt = points[i];
    pt.kinetic_energy = kinetic_energies[i];
    try {
      const EigenoperatorSet plus = eigenoperators(solver, pt.kinetic_energy, Direction::plus);
      const EigenoperatorSet minus = eigenoperators(solver, pt.kinetic_energy, Direction::minus);
      const std::array<TransitionProbabilities, 3> tps{
          transition_probabilities(plus), transition_probabilities(minus),
          averaged_transition_probabilities(plus, minus)};
      for (std::size_t r = 0; r < 3; ++r) {
        pt.p[r] = tps[r].p;
        pt.reports[r] = report(tps[r], th, gs);
      }
    } catch (const Error& e) {
      pt.error = e.what();
    }
  });
  return points;
}

CommandResult cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const SystemSpec spec = build_spec(cfg);
  const ScatteringSolver solver(spec, build_settings(cfg));
  const std::vector<double> grid = sweep_grid(cfg, spec);
  const std::vector<SweepPoint> points = evaluate_points(solver, cfg.thermo.beta, grid, cfg.threads);
  const std::size_t n = spec.size();

  std::string body = header("sweep", cfg);
  body += "# levels=" + join(spec.levels()) + "\n";
  body += "# beta=" + format_double(cfg.thermo.beta) + "\n";
  body += "# P_a_b is the probability of the jump from level b to level a\n";
  body += "E_p,direction,avg_W,deltaF,eta,gamma,sigma,bound_slack" + p_header(n) + ",error\n";

  std::vector<double> energies, avg_w;
  std::size_t failed = 0;
  double direction_gap = 0.0;
  for (const SweepPoint& pt : points) {
    if (!pt.error.empty()) ++failed;
    for (std::size_t r = 0; r < 3; ++r) {
      const FluctuationReport& rep = pt.reports[r];
      const bool ok = pt.error.empty();
      auto cell = [&](double x) { return "," + format_double(ok ? x : std::nan("")); };
      body += format_double(pt.kinetic_energy) + "," + kRowLabels[r] + cell(rep.avg_W) +
              cell(rep.delta_F) + cell(rep.eta) + cell(rep.gamma) + cell(rep.sigma) +
              cell(rep.bound_slack) + p_cells(ok ? pt.p[r] : Eigen::MatrixXd(), n) + "," +
              clean(pt.error) + "\n";
    }
    energies.push_back(pt.kinetic_energy);
    avg_w.push_back(pt.error.empty() ? pt.reports[2].avg_W : std::nan(""));
    if (pt.error.empty()) {
      direction_gap = std::max(direction_gap, (pt.p[0] - pt.p[1]).cwiseAbs().maxCoeff());
    }
  }

  CommandResult res;
  res.files.push_back(output_path(cfg, "sweep.csv"));
  write_file(res.files.back(), body);

  const bool symmetric = spec.profile().mirror_symmetric();
  const std::optional<double> crossing = first_sign_change(energies, avg_w);
  res.summary = {{"command", "sweep"},
                 {"config_hash", config_hash(cfg)},
                 {"points", points.size()},
                 {"rows", 3 * points.size()},
                 {"failed_points", failed},
                 {"mirror_symmetric", symmetric},
                 {"max_direction_difference", direction_gap},
                 {"first_sign_change_avg_W", optional_json(crossing)}};
  // Symmetric potentials must give identical per-direction rows.
  if (symmetric && direction_gap > 1e-8) {
    res.exit_code = kExitInvariant;
    log << "sweep: per-direction rows differ by " << format_short(direction_gap)
        << " on a mirror-symmetric potential\n";
  }
  res.summary["exit_code"] = res.exit_code;
  res.files.push_back(output_path(cfg, "sweep.json"));
  write_file(res.files.back(), res.summary.dump(2) + "\n");

  log << "sweep: " << 3 * points.size() << " rows (" << failed << " failed points) -> "
      << res.files.front() << "\n";
  if (crossing) log << "sweep: <W> first changes sign near E_p = " << format_short(*crossing) << "\n";
  return res;
}

namespace {

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool lower_bound = false;  // value >= -tolerance instead of value < tolerance
  bool convergence = false;
  bool passed = true;
  std::string detail;
};

struct PointStats {
  double unitarity = 0, bistochastic = 0, time_reversal = 0, mirror = 0;
  double completeness = 0, eigen = 0, closed = 0;
  double fr = 0, eta_diff = 0, slack = kInf, sigma = kInf, sigma_diff = 0, gamma_z = 0, free_eta = 0;
  bool subset = false;
  double micro = 0, slice_change = 0, import_gamma = 0, oracle = 0;
  std::string error;
  bool convergence_error = false;
};

class CheckList {
 public:
  void upper(const std::string& name, double value, double tol, const std::string& detail = {},
             bool convergence = false) {
    Check c{name, value, tol, false, convergence, std::isfinite(value) && value < tol, detail};
    checks_.push_back(c);
  }
  void lower(const std::string& name, double value, double tol, const std::string& detail = {}) {
    Check c{name, value, tol, true, false, !std::isnan(value) && value >= -tol, detail};
    checks_.push_back(c);
  }
  void fail(const std::string& name, const std::string& detail, bool convergence) {
    checks_.push_back(Check{name, std::nan(""), 0.0, false, convergence, false, detail});
  }
  void skip(const std::string& name, const std::string& reason) {
    checks_.push_back(Check{name, std::nan(""), 0.0, false, false, true, "skipped: " + reason});
  }
  const std::vector<Check>& checks() const { return checks_; }

 private:
  std::vector<Check> checks_;
};

PointStats verify_point(const ScatteringSolver& solver, const ScatteringSolver* fine, double ep,
                        const ThermalState& th, const GapStructure& gs, bool subset) {
  const SystemSpec& spec = solver.spec();
  const auto n = static_cast<Eigen::Index>(spec.size());
  PointStats st;
  st.subset = subset;
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const double e = ep + spec.level(j);
    const ScatteringMatrixE sm = solver.solve(e);
    st.unitarity = std::max(st.unitarity, unitarity_residual(sm));
    st.bistochastic = std::max(st.bistochastic, bistochasticity_residual(sm));
    st.time_reversal = std::max(st.time_reversal, time_reversal_residual(sm));
    if (spec.profile().mirror_symmetric())
      st.mirror = std::max(st.mirror, mirror_symmetry_residual(sm));
    if (subset && fine) st.slice_change = std::max(st.slice_change, max_entry_difference(sm, fine->solve(e)));
    if (subset && spec.profile().shape == ProfileShape::flat)
      st.oracle = std::max(st.oracle, max_entry_difference(
                                          sm, flat_barrier_oracle(spec, e, solver.settings().threshold_guard)));
  }
  std::array<TransitionProbabilities, 2> tps;
  for (Direction a : kDirections) {
    const EigenoperatorSet e = eigenoperators(solver, ep, a);
    st.completeness = std::max(
        st.completeness, (completeness(e) - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff());
    st.eigen = std::max(st.eigen, eigenoperator_residual(e));
    const TransitionProbabilities tp = transition_probabilities(e);
    tps[static_cast<std::size_t>(direction_index(a))] = tp;
    for (std::size_t jp = 0; jp < spec.size(); ++jp)
      for (std::size_t j = 0; j < spec.size(); ++j)
        if (ep + spec.level(j) <= spec.level(jp))
          st.closed = std::max(st.closed, tp.p(static_cast<Eigen::Index>(jp), static_cast<Eigen::Index>(j)));
    const FluctuationReport r = report(tp, th, gs);
    st.fr = std::max(st.fr, r.fluctuation_residual);
    st.eta_diff = std::max(
        st.eta_diff, std::abs(eta_direct(dual_distribution(tp, th, gs.tolerance)) - eta_gapsum(tp, gs, th)));
    if (th.beta > 0.0) st.slack = std::min(st.slack, r.bound_slack);
    st.sigma = std::min(st.sigma, r.sigma);
    st.sigma_diff = std::max(st.sigma_diff, std::abs(r.sigma - r.sigma_identity));
    st.gamma_z = std::max(st.gamma_z, std::abs(effective_partition(e, th.beta) / th.partition - r.gamma));
    if (spec.is_free()) st.free_eta = std::max(st.free_eta, std::abs(r.eta));
    if (subset) {
      const JarzynskiResult j = modified_jarzynski(from_eigenoperators(e), th.beta, gs.tolerance);
      st.import_gamma = std::max(st.import_gamma, std::abs(j.gamma - r.gamma));
    }
  }
  TransitionProbabilities avg = tps[0];
  avg.p = 0.5 * (tps[0].p + tps[1].p);
  avg.incoming.reset();
  const FluctuationReport ra = report(avg, th, gs);
  st.fr = std::max(st.fr, ra.fluctuation_residual);
  if (th.beta > 0.0) st.slack = std::min(st.slack, ra.bound_slack);
  st.sigma = std::min(st.sigma, ra.sigma);
  if (subset) st.micro = microreversibility_check(solver, ep, th).residual;
  return st;
}

void thermal_checks(const ScatteringSolver& solver, const RunConfig& cfg, CheckList& list,
                    json* matrix_out = nullptr, std::size_t* solves = nullptr,
                    double* change = nullptr) {
  const double bt = *cfg.thermo.beta_tilde;
  StochasticOptions opt;
  opt.check_convergence = cfg.numerics.check_convergence;
  opt.convergence_tolerance = cfg.numerics.quadrature_tolerance;
  opt.threads = cfg.threads;
  StochasticMatrix s;
  try {
    s = stochastic_matrix(solver, build_thermal_distribution(cfg), opt);
  } catch (const QuadratureConvergence& e) {
    list.fail("thermal quadrature convergence", e.what(), true);
    return;
  } catch (const CompositionError& e) {
    list.fail("thermal solver", e.what(), true);
    return;
  }
  if (matrix_out) {
    *matrix_out = json::array();
    for (Eigen::Index a = 0; a < s.s.rows(); ++a) {
      std::vector<double> row(static_cast<std::size_t>(s.s.cols()));
      for (Eigen::Index b = 0; b < s.s.cols(); ++b) row[static_cast<std::size_t>(b)] = s.s(a, b);
      matrix_out->push_back(row);
    }
  }
  if (solves) *solves = s.solves;
  if (change) *change = s.convergence_change;
  if (s.convergence_change >= 0.0)
    list.upper("thermal quadrature convergence", s.convergence_change, cfg.numerics.quadrature_tolerance,
               "entry change when doubling the node count", true);
  list.upper("thermal column sums", column_stochasticity_residual(s), 1e-6);
  const BalanceCheck db = detailed_balance_check(s, bt);
  if (db.applicable)
    list.upper("thermal detailed balance", db.residual, 1e-6);
  else
    list.skip("thermal detailed balance", db.reason);
  const ThermalState th = thermal_state(solver.spec(), cfg.thermo.beta);
  const BalanceCheck h4 = heat_exchange_ft_check(s, th, bt);
  if (h4.applicable)
    list.upper("thermal heat-exchange relation", h4.residual, 1e-6);
  else
    list.skip("thermal heat-exchange relation", h4.reason);
  const StochasticMatrix exact = renormalized(s);
  list.upper("thermal unconditioned fluctuation relation",
             fluctuation_residual(unconditioned_distribution(exact, th), unconditioned_dual(exact, th),
                                  cfg.thermo.beta),
             1e-8);
}

int exit_for(const std::vector<Check>& checks) {
  bool invariant = false;
  for (const Check& c : checks) {
    if (c.passed) continue;
    if (c.convergence) return kExitConvergence;
    invariant = true;
  }
  return invariant ? kExitInvariant : kExitOk;
}

json checks_json(const std::vector<Check>& checks) {
  json out = json::array();
  for (const Check& c : checks)
    out.push_back({{"name", c.name},
                   {"value", std::isfinite(c.value) ? json(c.value) : json(nullptr)},
                   {"tolerance", c.tolerance},
                   {"relation", c.lower_bound ? ">= -tol" : "< tol"},
                   {"kind", c.convergence ? "convergence" : "invariant"},
                   {"passed", c.passed},
                   {"detail", c.detail}});
  return out;
}

void print_checks(const std::vector<Check>& checks, std::ostream& log) {
  for (const Check& c : checks) {
    char line[256];
    if (std::isnan(c.value))
      std::snprintf(line, sizeof line, "%s  %-44s %s", c.passed ? "SKIP" : "FAIL", c.name.c_str(),
                    c.detail.c_str());
    else
      std::snprintf(line, sizeof line, "%s  %-44s %11.3e %s %.0e", c.passed ? "PASS" : "FAIL",
                    c.name.c_str(), c.value, c.lower_bound ? ">= -" : "<   ", c.tolerance);
    log << line << "\n";
  }
}

}  // namespace

CommandResult cmd_verify(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const SystemSpec spec = build_spec(cfg);
  const SolverSettings settings = build_settings(cfg);
  const ScatteringSolver solver(spec, settings);
  SolverSettings fine_settings = settings;
  fine_settings.slices *= 2;
  const ScatteringSolver fine(spec, fine_settings);
  const std::vector<double> grid = sweep_grid(cfg, spec);
  const double beta = cfg.thermo.beta;
  const ThermalState th = thermal_state(spec, beta);
  const GapStructure gs = gap_structure(spec, beta, settings.gap_tolerance);

  std::vector<PointStats> stats(grid.size());
  parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
    const bool subset = i % cfg.verify.stride == 0 || i + 1 == grid.size();
    try {
      stats[i] = verify_point(solver, &fine, grid[i], th, gs, subset);
    } catch (const CompositionError& e) {
      stats[i].error = e.what();
      stats[i].convergence_error = true;
    } catch (const Error& e) {
      stats[i].error = e.what();
    }
  });

  PointStats w;  // worst case over the sweep
  std::string first_error;
  bool convergence_error = false;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const PointStats& s = stats[i];
    if (!s.error.empty()) {
      ++failed;
      if (first_error.empty()) first_error = "E_p=" + format_double(grid[i]) + ": " + s.error;
      convergence_error = convergence_error || s.convergence_error;
      continue;
    }
    for (auto [dst, src] : {std::pair{&w.unitarity, s.unitarity}, {&w.bistochastic, s.bistochastic},
                            {&w.time_reversal, s.time_reversal}, {&w.mirror, s.mirror},
                            {&w.completeness, s.completeness}, {&w.eigen, s.eigen}, {&w.closed, s.closed},
                            {&w.fr, s.fr}, {&w.eta_diff, s.eta_diff}, {&w.sigma_diff, s.sigma_diff},
                            {&w.gamma_z, s.gamma_z}, {&w.free_eta, s.free_eta}, {&w.micro, s.micro},
                            {&w.slice_change, s.slice_change}, {&w.import_gamma, s.import_gamma},
                            {&w.oracle, s.oracle}})
      *dst = std::max(*dst, src);
    w.slack = std::min(w.slack, s.slack);
    w.sigma = std::min(w.sigma, s.sigma);
  }

  CheckList list;
  const std::string over = "over " + std::to_string(grid.size()) + " sweep points";
  const std::string sub = "every " + std::to_string(cfg.verify.stride) + "th sweep point";
  if (failed)
    list.fail("sweep point evaluation", std::to_string(failed) + " points failed; " + first_error,
              convergence_error);
  list.upper("slice convergence (M vs 2M)", w.slice_change, cfg.numerics.slice_tolerance, sub, true);
  list.upper("S-matrix unitarity", w.unitarity, 1e-8, over);
  list.upper("S-matrix bistochasticity", w.bistochastic, 1e-8, over);
  list.upper("S-matrix time reversal", w.time_reversal, 1e-8, over);
  if (spec.profile().mirror_symmetric()) list.upper("S-matrix mirror symmetry", w.mirror, 1e-8, over);
  if (spec.profile().shape == ProfileShape::flat)
    list.upper("flat-barrier oracle", w.oracle, 1e-10, sub);
  list.upper("Kraus completeness", w.completeness, 1e-8, over);
  list.upper("eigenoperator relation", w.eigen, 1e-12, over);
  list.upper("closed channels carry no probability", w.closed, 1e-300, over);
  list.upper("fluctuation relation", w.fr, 1e-8, over);
  list.upper("eta direct vs gap sum", w.eta_diff, 1e-10, over);
  if (beta > 0.0) list.lower("bound slack", w.slack, 1e-10, over);
  list.lower("entropy production", w.sigma, 1e-10, over);
  list.upper("entropy production, two forms", w.sigma_diff, 1e-9, over);
  list.upper("gamma vs effective partition ratio", w.gamma_z, 1e-9, over);
  if (spec.is_free()) list.upper("free potential: eta vanishes", w.free_eta, 1e-10, over);
  list.upper("microreversibility", w.micro, 1e-8, sub);
  list.upper("scattering Kraus import: gamma", w.import_gamma, 1e-10, sub);

  // Generic-map lab on seeded random maps.
  double a5 = 0.0, jz = 0.0, unital = 0.0, bound = kInf;
  const double lab_beta = beta > 0.0 ? beta : 1.0;
  for (std::size_t i = 0; i < cfg.verify.random_maps; ++i) {
    const std::size_t d = 2 + i % (cfg.verify.max_dim - 1);
    const std::size_t l = 1 + (i / 2) % cfg.verify.max_rank;
    const bool is_unital = i % 2 == 1;
    const KrausMap m = random_map(d, l, cfg.seed + i, is_unital);
    const JarzynskiResult j = modified_jarzynski(m, lab_beta);
    a5 = std::max(a5, j.relation_residual);
    jz = std::max(jz, std::abs(j.lhs - j.rhs));
    bound = std::min(bound, j.avg_W - j.bound);
    if (is_unital) unital = std::max(unital, std::abs(j.gamma - 1.0));
  }
  if (cfg.verify.random_maps) {
    const std::string maps = std::to_string(cfg.verify.random_maps) + " random maps, seed " +
                             std::to_string(cfg.seed);
    list.upper("random maps: fluctuation relation", a5, 1e-10, maps);
    list.upper("random maps: modified Jarzynski", jz, 1e-10, maps);
    list.upper("random maps: unital gamma = 1", unital, 1e-12, maps);
    list.lower("random maps: bound slack", bound, 1e-10, maps);
  }

  if (cfg.thermo.beta_tilde) thermal_checks(solver, cfg, list);

  CommandResult res;
  res.exit_code = exit_for(list.checks());
  print_checks(list.checks(), log);
  std::size_t passed = 0;
  for (const Check& c : list.checks()) passed += c.passed ? 1 : 0;
  log << "verify: " << passed << "/" << list.checks().size() << " checks passed, exit "
      << res.exit_code << "\n";
  res.summary = {{"command", "verify"},
                 {"config_hash", config_hash(cfg)},
                 {"exit_code", res.exit_code},
                 {"points", grid.size()},
                 {"checks", checks_json(list.checks())}};
  res.files.push_back(output_path(cfg, "verify.json"));
  write_file(res.files.back(), res.summary.dump(2) + "\n");
  return res;
}

CommandResult cmd_smatrix(const RunConfig& cfg, double energy, std::ostream& log) {
  validate(cfg);
  const SystemSpec spec = build_spec(cfg);
  const ScatteringSolver solver(spec, build_settings(cfg));
  ScatteringMatrixE sm;
  try {
    sm = solver.solve(energy);
  } catch (const ThresholdError& e) {
    throw ConfigError(std::string("smatrix: ") + e.what());
  } catch (const NoOpenChannels& e) {
    throw ConfigError(std::string("smatrix: ") + e.what());
  }
  const double unit = unitarity_residual(sm);
  std::vector<double> open(sm.open.begin(), sm.open.end());

  std::string body = header("smatrix", cfg);
  body += "# energy=" + format_double(energy) + "\n";
  std::string open_list;
  for (std::size_t i = 0; i < sm.open.size(); ++i) open_list += (i ? "," : "") + std::to_string(sm.open[i]);
  body += "# open=" + open_list + "\n";
  body += "# unitarity_residual=" + format_double(unit) + "\n";
  body += "out_direction,out_level,in_direction,in_level,re,im\n";
  for (Direction out : kDirections)
    for (std::size_t jo : sm.open)
      for (Direction in : kDirections)
        for (std::size_t ji : sm.open) {
          const std::complex<double> z = sm.amplitude(out, jo, in, ji);
          body += std::string(to_string(out)) + "," + std::to_string(jo) + "," + to_string(in) + "," +
                  std::to_string(ji) + "," + format_double(z.real()) + "," + format_double(z.imag()) + "\n";
        }

  CommandResult res;
  res.files.push_back(output_path(cfg, "smatrix.csv"));
  write_file(res.files.back(), body);
  res.summary = {{"command", "smatrix"},
                 {"config_hash", config_hash(cfg)},
                 {"energy", energy},
                 {"open", sm.open},
                 {"unitarity_residual", unit},
                 {"exit_code", kExitOk}};
  res.files.push_back(output_path(cfg, "smatrix.json"));
  write_file(res.files.back(), res.summary.dump(2) + "\n");
  log << "smatrix: " << sm.open.size() << " open channels at E = " << format_double(energy)
      << ", unitarity residual " << format_short(unit) << " -> " << res.files.front() << "\n";
  return res;
}

CommandResult cmd_figure2(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  CommandResult res;
  res.summary = {{"command", "figure2"}, {"config_hash", config_hash(cfg)}, {"models", json::object()}};
  const double delta = cfg.system.delta;
  for (std::size_t n : {2u, 3u, 4u}) {
    const RunConfig model = figure_model(cfg, n);
    const SystemSpec spec = build_spec(model);
    const ScatteringSolver solver(spec, build_settings(model));
    const GapStructure gs = gap_structure(spec, cfg.thermo.beta, cfg.numerics.gap_tolerance);
    json model_summary;
    for (const char* panel : {"low", "high"}) {
      const bool low = panel[0] == 'l';
      const std::size_t count = low ? cfg.figure.low_count : cfg.figure.high_count;
      const double lo = low ? 0.0 : cfg.figure.high_min;
      const double hi = low ? static_cast<double>(n) * delta : cfg.figure.high_max;
      std::vector<double> grid;
      for (std::size_t i = 0; i < count; ++i) {
        // Low panel starts one step above zero; the high panel includes both ends.
        const double t = low ? static_cast<double>(i + 1) / static_cast<double>(count)
                             : (count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1));
        grid.push_back(clear_of_thresholds(spec, lo + t * (hi - lo), cfg.numerics.threshold_guard));
      }
      const std::vector<SweepPoint> pts = evaluate_points(solver, cfg.thermo.beta, grid, cfg.threads);
      std::vector<double> e, avg_w, df, eta, abs_eta, gamma;
      std::size_t failed = 0;
      for (const SweepPoint& pt : pts) {
        const bool ok = pt.error.empty();
        failed += ok ? 0 : 1;
        const FluctuationReport& r = pt.reports[2];
        const double nan = std::nan("");
        e.push_back(pt.kinetic_energy);
        avg_w.push_back(ok ? r.avg_W : nan);
        df.push_back(ok ? r.delta_F : nan);
        eta.push_back(ok ? r.eta : nan);
        abs_eta.push_back(ok ? std::abs(r.eta) : nan);
        gamma.push_back(ok ? r.gamma : nan);
      }
      const std::vector<double> w_win = window_average(e, avg_w, cfg.figure.window);
      const std::vector<double> f_win = window_average(e, df, cfg.figure.window);
      const std::vector<double> eta_win = window_average(e, eta, cfg.figure.window);
      const std::vector<double> abs_win = window_average(e, abs_eta, cfg.figure.window);

      std::vector<double> markers;
      for (std::size_t k = 1; k < n; ++k) markers.push_back(static_cast<double>(k) * delta);
      std::string body = header("figure2", cfg);
      body += "# model_levels=" + std::to_string(n) + "\n";
      body += "# panel=" + std::string(panel) + "\n";
      body += "# gap_markers=" + join(gs.gaps) + "\n";
      body += "# threshold_markers=" + join(markers) + "\n";
      body += "# direction=avg\n";
      body += "# P_a_b is the probability of the jump from level b to level a\n";
      body += "E_p,avg_W,deltaF,eta,gamma,abs_eta,avg_W_window,deltaF_window,eta_window,abs_eta_window" +
              p_header(n) + ",error\n";
      for (std::size_t i = 0; i < pts.size(); ++i)
        body += format_double(e[i]) + "," + format_double(avg_w[i]) + "," + format_double(df[i]) + "," +
                format_double(eta[i]) + "," + format_double(gamma[i]) + "," + format_double(abs_eta[i]) + "," +
                format_double(w_win[i]) + "," + format_double(f_win[i]) + "," +
                format_double(eta_win[i]) + "," + format_double(abs_win[i]) +
                p_cells(pts[i].error.empty() ? pts[i].p[2] : Eigen::MatrixXd(), n) + "," + clean(pts[i].error) + "\n";
      res.files.push_back(output_path(cfg, "figure2_N" + std::to_string(n) + "_" + panel + ".csv"));
      write_file(res.files.back(), body);

      double min_w = kInf, max_w = -kInf, tail = 0.0;
      std::size_t tail_n = 0;
      for (std::size_t i = 0; i < e.size(); ++i) {
        if (!std::isfinite(avg_w[i])) continue;
        min_w = std::min(min_w, avg_w[i]);
        max_w = std::max(max_w, avg_w[i]);
        if (e[i] >= hi - cfg.figure.window) {
          tail += abs_eta[i];
          ++tail_n;
        }
      }
      model_summary[panel] = {{"points", pts.size()},
                              {"failed_points", failed},
                              {"min_avg_W", min_w},
                              {"max_avg_W", max_w},
                              {"first_sign_change_avg_W", optional_json(first_sign_change(e, avg_w))},
                              {"mean_abs_eta_last_window", tail_n ? tail / static_cast<double>(tail_n) : 0.0},
                              {"gap_markers", gs.gaps}};
    }
    res.summary["models"][std::to_string(n)] = model_summary;
  }
  res.summary["exit_code"] = kExitOk;
  res.files.push_back(output_path(cfg, "figure2.json"));
  write_file(res.files.back(), res.summary.dump(2) + "\n");
  log << "figure2: wrote " << res.files.size() - 1 << " panel files to " << cfg.output.dir << "\n";
  return res;
}

CommandResult cmd_thermal(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  if (!cfg.thermo.beta_tilde) throw ConfigError("thermal needs thermo.beta_tilde");
  const SystemSpec spec = build_spec(cfg);
  const ScatteringSolver solver(spec, build_settings(cfg));
  CheckList list;
  json matrix;
  std::size_t solves = 0;
  double change = -1.0;
  thermal_checks(solver, cfg, list, &matrix, &solves, &change);

  CommandResult res;
  res.exit_code = exit_for(list.checks());
  std::string body = header("thermal", cfg);
  body += "# levels=" + join(spec.levels()) + "\n";
  body += "# beta_tilde=" + format_double(*cfg.thermo.beta_tilde) + "\n";
  body += "# S_to_from is the probability of the jump from level `from` to level `to`\n";
  body += "to,from,S\n";
  if (matrix.is_array())
    for (std::size_t a = 0; a < matrix.size(); ++a)
      for (std::size_t b = 0; b < matrix[a].size(); ++b)
        body += std::to_string(a) + "," + std::to_string(b) + "," + format_double(matrix[a][b].get<double>()) + "\n";
  res.files.push_back(output_path(cfg, "thermal.csv"));
  write_file(res.files.back(), body);

  print_checks(list.checks(), log);
  res.summary = {{"command", "thermal"},
                 {"config_hash", config_hash(cfg)},
                 {"exit_code", res.exit_code},
                 {"solves", solves},
                 {"convergence_change", change},
                 {"matrix", matrix},
                 {"checks", checks_json(list.checks())}};
  res.files.push_back(output_path(cfg, "thermal.json"));
  write_file(res.files.back(), res.summary.dump(2) + "\n");
  log << "thermal: " << solves << " scattering solves -> " << res.files.front() << "\n";
  return res;
}

SMatrixFile read_smatrix_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  SMatrixFile f;
  f.config_hash = t.comment_value("config_hash");
  f.sm.energy = std::strtod(t.comment_value("energy").c_str(), nullptr);
  f.unitarity_residual = std::strtod(t.comment_value("unitarity_residual").c_str(), nullptr);
  const std::string open = t.comment_value("open");
  if (!open.empty())
    for (const std::string& s : split(open)) f.sm.open.push_back(std::stoul(s));
  const auto m = static_cast<Eigen::Index>(2 * f.sm.open.size());
  f.sm.s = Eigen::MatrixXcd::Zero(m, m);
  auto dir = [](const std::string& s) { return s == "+" ? Direction::plus : Direction::minus; };
  for (const auto& row : t.rows) {
    const Eigen::Index r = f.sm.index(dir(row.at(0)), std::stoul(row.at(1)));
    const Eigen::Index c = f.sm.index(dir(row.at(2)), std::stoul(row.at(3)));
    f.sm.s(r, c) = {std::strtod(row.at(4).c_str(), nullptr), std::strtod(row.at(5).c_str(), nullptr)};
  }
  return f;
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw InvalidParameter("no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return std::strtod(rows.at(row).at(column(name)).c_str(), nullptr);
}

std::string CsvTable::comment_value(const std::string& key) const {
  for (const std::string& c : comments)
    if (c.rfind(key + "=", 0) == 0) return c.substr(key.size() + 1);
  throw InvalidParameter("no header entry '" + key + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line.size() > 2 ? line.substr(2) : "");
    } else if (t.columns.empty()) {
      t.columns = split(line);
    } else {
      t.rows.push_back(split(line));
    }
  }
  return t;
}

}  // namespace qscat
