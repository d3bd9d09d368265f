#include "qscat/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qscat/map_builder.hpp"

namespace qscat {

using nlohmann::json;

namespace {

// Recursively lay user values over the defaults. Every user key must exist in
// the defaults; a null default (beta_tilde) accepts any number.
void merge_strict(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("'" + path + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

const json& at(const json& j, const std::string& block, const std::string& key) {
  return j.at(block).at(key);
}

double number(const json& j, const std::string& block, const std::string& key) {
  const json& v = at(j, block, key);
  if (!v.is_number()) throw ConfigError("'" + block + "." + key + "' must be a number");
  return v.get<double>();
}

std::size_t count(const json& j, const std::string& block, const std::string& key) {
  const json& v = block.empty() ? j.at(key) : at(j, block, key);
  const std::string name = block.empty() ? key : block + "." + key;
  if (!v.is_number_integer()) throw ConfigError("'" + name + "' must be an integer");
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  const long long x = v.get<long long>();
  if (x < 0) throw ConfigError("'" + name + "' must be >= 0");
  return static_cast<std::size_t>(x);
}

std::string text(const json& j, const std::string& block, const std::string& key) {
  const json& v = at(j, block, key);
  if (!v.is_string()) throw ConfigError("'" + block + "." + key + "' must be a string");
  return v.get<std::string>();
}

bool flag(const json& j, const std::string& block, const std::string& key) {
  const json& v = at(j, block, key);
  if (!v.is_boolean()) throw ConfigError("'" + block + "." + key + "' must be true or false");
  return v.get<bool>();
}

std::vector<double> number_list(const json& v, const std::string& name) {
  if (!v.is_array()) throw ConfigError("'" + name + "' must be an array of numbers");
  std::vector<double> out;
  for (const json& x : v) {
    if (!x.is_number()) throw ConfigError("'" + name + "' must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

json to_json(const RunConfig& c) {
  json j;
  j["system"] = {{"levels", c.system.levels},
                 {"n", c.system.n},
                 {"delta", c.system.delta},
                 {"coupling", c.system.coupling},
                 {"coupling_matrix", c.system.coupling_matrix},
                 {"V0", c.system.V0},
                 {"a", c.system.a},
                 {"mass", c.system.mass},
                 {"hbar", c.system.hbar},
                 {"shape", c.system.shape}};
  j["numerics"] = {{"slices", c.numerics.slices},
                   {"threshold_guard", c.numerics.threshold_guard},
                   {"scheme", c.numerics.scheme},
                   {"gap_tolerance", c.numerics.gap_tolerance},
                   {"quadrature_nodes", c.numerics.quadrature_nodes},
                   {"cutoff", c.numerics.cutoff},
                   {"check_convergence", c.numerics.check_convergence},
                   {"quadrature_tolerance", c.numerics.quadrature_tolerance},
                   {"slice_tolerance", c.numerics.slice_tolerance}};
  j["thermo"] = {{"beta", c.thermo.beta}, {"beta_tilde", nullptr}};
  if (c.thermo.beta_tilde) j["thermo"]["beta_tilde"] = *c.thermo.beta_tilde;
  j["sweep"] = {{"ep_min", c.sweep.ep_min},
                {"ep_max", c.sweep.ep_max},
                {"count", c.sweep.count},
                {"grid", c.sweep.grid}};
  j["figure"] = {{"low_count", c.figure.low_count},
                 {"high_min", c.figure.high_min},
                 {"high_max", c.figure.high_max},
                 {"high_count", c.figure.high_count},
                 {"window", c.figure.window}};
  j["verify"] = {{"random_maps", c.verify.random_maps},
                 {"max_dim", c.verify.max_dim},
                 {"max_rank", c.verify.max_rank},
                 {"stride", c.verify.stride}};
  j["output"] = {{"dir", c.output.dir}, {"prefix", c.output.prefix}, {"format", c.output.format}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

RunConfig config_from_json(const json& user) {
  json j = to_json(RunConfig{});
  merge_strict(j, user, "");

  RunConfig c;
  c.system.levels = number_list(at(j, "system", "levels"), "system.levels");
  c.system.n = count(j, "system", "n");
  c.system.delta = number(j, "system", "delta");
  c.system.coupling = text(j, "system", "coupling");
  const json& m = at(j, "system", "coupling_matrix");
  if (!m.is_array()) throw ConfigError("'system.coupling_matrix' must be an array of rows");
  for (const json& row : m) c.system.coupling_matrix.push_back(number_list(row, "system.coupling_matrix"));
  c.system.V0 = number(j, "system", "V0");
  c.system.a = number(j, "system", "a");
  c.system.mass = number(j, "system", "mass");
  c.system.hbar = number(j, "system", "hbar");
  c.system.shape = text(j, "system", "shape");

  c.numerics.slices = count(j, "numerics", "slices");
  c.numerics.threshold_guard = number(j, "numerics", "threshold_guard");
  c.numerics.scheme = text(j, "numerics", "scheme");
  c.numerics.gap_tolerance = number(j, "numerics", "gap_tolerance");
  c.numerics.quadrature_nodes = count(j, "numerics", "quadrature_nodes");
  c.numerics.cutoff = number(j, "numerics", "cutoff");
  c.numerics.check_convergence = flag(j, "numerics", "check_convergence");
  c.numerics.quadrature_tolerance = number(j, "numerics", "quadrature_tolerance");
  c.numerics.slice_tolerance = number(j, "numerics", "slice_tolerance");

  c.thermo.beta = number(j, "thermo", "beta");
  if (!at(j, "thermo", "beta_tilde").is_null()) c.thermo.beta_tilde = number(j, "thermo", "beta_tilde");

  c.sweep.ep_min = number(j, "sweep", "ep_min");
  c.sweep.ep_max = number(j, "sweep", "ep_max");
  c.sweep.count = count(j, "sweep", "count");
  c.sweep.grid = text(j, "sweep", "grid");

  c.figure.low_count = count(j, "figure", "low_count");
  c.figure.high_min = number(j, "figure", "high_min");
  c.figure.high_max = number(j, "figure", "high_max");
  c.figure.high_count = count(j, "figure", "high_count");
  c.figure.window = number(j, "figure", "window");

  c.verify.random_maps = count(j, "verify", "random_maps");
  c.verify.max_dim = count(j, "verify", "max_dim");
  c.verify.max_rank = count(j, "verify", "max_rank");
  c.verify.stride = count(j, "verify", "stride");

  c.output.dir = text(j, "output", "dir");
  c.output.prefix = text(j, "output", "prefix");
  c.output.format = text(j, "output", "format");

  if (!j.at("seed").is_number_unsigned() && !(j.at("seed").is_number_integer() && j.at("seed").get<long long>() >= 0))
    throw ConfigError("'seed' must be a non-negative integer");
  c.seed = j.at("seed").get<std::uint64_t>();
  c.threads = count(j, "", "threads");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path + "'");
  out << to_json(cfg).dump(2) << '\n';
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json j = to_json(cfg);
  json* slot = &j;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!slot->is_object() || !slot->contains(part))
      throw ConfigError("unknown config key '" + key + "'");
    slot = &(*slot)[part];
  }
  if (slot->is_object()) throw ConfigError("'" + key + "' is a block, not a value");

  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded() || (slot->is_string() && !value.is_string())) value = raw;
  *slot = value;
  cfg = config_from_json(j);
}

void validate(const RunConfig& c) {
  const SystemConfig& s = c.system;
  if (s.levels.empty()) {
    require(s.n >= 1, "system.n must be >= 1");
    require(positive(s.delta), "system.delta must be > 0");
  }
  for (double e : s.levels) require(std::isfinite(e), "system.levels must be finite");
  require(std::isfinite(s.V0) && s.V0 >= 0.0, "system.V0 must be >= 0 (0 is the free particle)");
  require(positive(s.a), "system.a must be > 0");
  require(positive(s.mass), "system.mass must be > 0");
  require(positive(s.hbar), "system.hbar must be > 0");
  require(s.coupling == "pauli-x" || s.coupling == "all-ones-offdiag" || s.coupling == "explicit",
          "system.coupling must be pauli-x, all-ones-offdiag or explicit");

  const NumericsConfig& n = c.numerics;
  require(n.slices >= 1, "numerics.slices must be >= 1");
  require(positive(n.threshold_guard), "numerics.threshold_guard must be > 0");
  require(n.scheme == "magnus4" || n.scheme == "midpoint", "numerics.scheme must be magnus4 or midpoint");
  require(positive(n.gap_tolerance), "numerics.gap_tolerance must be > 0");
  require(n.quadrature_nodes >= 2, "numerics.quadrature_nodes must be >= 2");
  require(positive(n.cutoff), "numerics.cutoff must be > 0");
  require(positive(n.quadrature_tolerance), "numerics.quadrature_tolerance must be > 0");
  require(positive(n.slice_tolerance), "numerics.slice_tolerance must be > 0");

  require(std::isfinite(c.thermo.beta) && c.thermo.beta >= 0.0, "thermo.beta must be >= 0");
  if (c.thermo.beta_tilde) require(positive(*c.thermo.beta_tilde), "thermo.beta_tilde must be > 0");

  require(positive(c.sweep.ep_min), "sweep.ep_min must be > 0");
  require(positive(c.sweep.ep_max), "sweep.ep_max must be > 0");
  require(c.sweep.count >= 1, "sweep.count must be >= 1");
  require(c.sweep.grid == "linear" || c.sweep.grid == "log", "sweep.grid must be linear or log");
  if (c.sweep.count > 1) require(c.sweep.ep_max > c.sweep.ep_min, "sweep.ep_max must exceed sweep.ep_min");

  require(c.figure.low_count >= 1, "figure.low_count must be >= 1");
  require(c.figure.high_count >= 1, "figure.high_count must be >= 1");
  require(positive(c.figure.high_min), "figure.high_min must be > 0");
  require(positive(c.figure.high_max) && c.figure.high_max > c.figure.high_min,
          "figure.high_max must exceed figure.high_min");
  require(positive(c.figure.window), "figure.window must be > 0");

  require(c.verify.max_dim >= 2, "verify.max_dim must be >= 2");
  require(c.verify.max_rank >= 1, "verify.max_rank must be >= 1");
  require(c.verify.stride >= 1, "verify.stride must be >= 1");

  require(!c.output.dir.empty(), "output.dir must not be empty");
  require(c.output.format == "csv", "output.format must be csv");
  require(c.threads >= 1, "threads must be >= 1");

  // The remaining structural checks (distinct levels, coupling shape and
  // symmetry) live in the model constructors.
  build_spec(c);
}

SystemSpec build_spec(const RunConfig& c) {
  const SystemConfig& s = c.system;
  try {
    const PotentialProfile profile{s.V0, s.a, parse_profile_shape(s.shape)};
    if (s.coupling == "explicit") {
      const std::size_t dim = s.levels.empty() ? s.n : s.levels.size();
      if (s.coupling_matrix.size() != dim)
        throw ConfigError("system.coupling_matrix must have one row per level");
      Eigen::MatrixXd w(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
      for (std::size_t i = 0; i < dim; ++i) {
        if (s.coupling_matrix[i].size() != dim)
          throw ConfigError("system.coupling_matrix must be square");
        for (std::size_t k = 0; k < dim; ++k)
          w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = s.coupling_matrix[i][k];
      }
      std::vector<double> levels = s.levels;
      if (levels.empty()) {
        for (std::size_t j = 0; j < s.n; ++j)
          levels.push_back((static_cast<double>(j) - 0.5 * static_cast<double>(s.n - 1)) * s.delta);
      }
      return SystemSpec(levels, w, profile, s.mass, s.hbar);
    }
    const CouplingPattern pattern = parse_coupling_pattern(s.coupling);
    if (!s.levels.empty())
      return SystemSpec(s.levels, coupling_matrix(pattern, s.levels.size()), profile, s.mass, s.hbar);
    return SystemSpec::ladder(s.n, s.delta, pattern, profile, s.mass, s.hbar);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
}

SolverSettings build_settings(const RunConfig& c) {
  SolverSettings s;
  s.slices = c.numerics.slices;
  s.threshold_guard = c.numerics.threshold_guard;
  s.scheme = parse_slice_scheme(c.numerics.scheme);
  s.gap_tolerance = c.numerics.gap_tolerance;
  return s;
}

ParticleEnergyDistribution build_thermal_distribution(const RunConfig& c) {
  if (!c.thermo.beta_tilde) throw ConfigError("thermo.beta_tilde must be set for the thermal ensemble");
  ParticleEnergyDistribution d = ParticleEnergyDistribution::thermal(*c.thermo.beta_tilde,
                                                                     c.numerics.quadrature_nodes);
  d.cutoff = c.numerics.cutoff;
  return d;
}

std::vector<double> sweep_grid(const RunConfig& c, const SystemSpec& spec) {
  std::vector<double> out;
  const std::size_t n = c.sweep.count;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    double ep = c.sweep.grid == "log"
                    ? c.sweep.ep_min * std::pow(c.sweep.ep_max / c.sweep.ep_min, t)
                    : c.sweep.ep_min + t * (c.sweep.ep_max - c.sweep.ep_min);
    if (i + 1 == n && n > 1) ep = c.sweep.ep_max;
    out.push_back(clear_of_thresholds(spec, ep, c.numerics.threshold_guard));
  }
  return out;
}

json hashed_config(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("threads");
  j["output"].erase("dir");
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string s = hashed_config(cfg).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qscat
