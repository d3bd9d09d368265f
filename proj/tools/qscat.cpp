// qscat: sweeps, invariant checks and figure data for the multichannel
// scattering model. See README.md for the config layout.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qscat/commands.hpp"

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool print_config = false;
};

qscat::RunConfig resolve(const Options& o) {
  qscat::RunConfig cfg = o.config_path.empty() ? qscat::RunConfig{} : qscat::load_config(o.config_path);
  for (const auto& s : o.overrides) qscat::apply_override(cfg, s);
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  qscat::validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multichannel scattering maps: sweeps, invariant checks and figure data"};
  app.require_subcommand(1);
  Options opt;
  double energy = 0.0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config_path, "JSON config file (defaults apply to missing keys)")
        ->check(CLI::ExistingFile);
    sub->add_option("--set", opt.overrides, "override a config value, e.g. --set system.V0=50")
        ->take_all();
    sub->add_option("--seed", opt.seed, "seed for the random-map checks");
    sub->add_option("--threads", opt.threads, "worker threads");
    sub->add_flag("--print-config", opt.print_config, "print the effective config as JSON and exit");
  };
  CLI::App* sweep = app.add_subcommand("sweep", "fluctuation statistics over a kinetic-energy grid");
  CLI::App* verify = app.add_subcommand("verify", "run every invariant check on the config");
  CLI::App* smatrix = app.add_subcommand("smatrix", "scattering matrix at one total energy");
  CLI::App* figure2 = app.add_subcommand("figure2", "<W> and dF panels for the 2, 3 and 4 level ladders");
  CLI::App* thermal = app.add_subcommand("thermal", "stochastic matrix for a thermal particle ensemble");
  for (CLI::App* sub : {sweep, verify, smatrix, figure2, thermal}) common(sub);
  smatrix->add_option("-E,--energy", energy, "total energy")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? qscat::kExitOk : qscat::kExitConfig;
  }

  try {
    const qscat::RunConfig cfg = resolve(opt);
    if (opt.print_config) {
      std::cout << qscat::to_json(cfg).dump(2) << "\n";
      return qscat::kExitOk;
    }
    qscat::CommandResult res;
    if (*sweep) res = qscat::cmd_sweep(cfg, std::cout);
    if (*verify) res = qscat::cmd_verify(cfg, std::cout);
    if (*smatrix) res = qscat::cmd_smatrix(cfg, energy, std::cout);
    if (*figure2) res = qscat::cmd_figure2(cfg, std::cout);
    if (*thermal) res = qscat::cmd_thermal(cfg, std::cout);
    return res.exit_code;
  } catch (const qscat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return qscat::kExitConfig;
  } catch (const qscat::QuadratureConvergence& e) {
    std::cerr << "convergence failure: " << e.what() << "\n";
    return qscat::kExitConvergence;
  } catch (const qscat::CompositionError& e) {
    std::cerr << "convergence failure: " << e.what() << "\n";
    return qscat::kExitConvergence;
  } catch (const qscat::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qscat::kExitInvariant;
  }
}
