#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "driftlab/experiment.hpp"
#include "driftlab/version.hpp"

namespace {

const std::map<std::string, std::string> kHelp = {
    {"drift", "weierstrass | weierstrass-sobolev | constant | zero"},
    {"alpha", "Hoelder exponent of the Weierstrass drift, in (0,1)"},
    {"beta", "log weight of weierstrass-sobolev"},
    {"constant", "value of the constant drift"},
    {"tail-tol", "truncation tolerance of the series"},
    {"p", "moment orders, comma separated"},
    {"n-list", "step counts or grid sizes, comma separated"},
    {"reps", "Monte-Carlo replications M"},
    {"master-ratio", "master grid size / largest n (>= 64)"},
    {"seed", "experiment seed (default: $DRIFTLAB_SEED, else built in)"},
    {"x0", "initial value"},
    {"output", "CSV path (default <subcommand>.csv)"},
    {"threads", "worker threads, 0 = all hardware threads"},
    {"j", "frequencies for spectral-identity"},
    {"delta", "interval lengths for spectral-identity"},
    {"t-lo", "left end of the spectral-identity interval"},
    {"substeps", "trapezoid sub-steps for spectral-identity"},
    {"nodes", "transform table nodes"},
    {"half-width", "transform working interval is x0 +- half-width"},
    {"pairs", "random pairs in transform-check"},
    {"grid-policy", "uniform-augmented | user"},
    {"grid-file", "one grid per line, times separated by commas or spaces"},
    {"path-dump", "coupling-gap: write t,W,W_tilde of replication 0 here"},
    {"samples", "largest Hoelder-probe sample count in regularity"},
    {"table-csv", "transform-check: export the x,T,G table here"},
    {"expect-slope", "LO,HI: fail (exit 3) unless every fitted slope lies in [LO,HI]"},
    {"min-r2", "fail (exit 3) unless every fit has r^2 >= this"},
    {"z-max", "fail (exit 3) unless every |z| <= this"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Strong-approximation experiments for SDEs with rough drift"};
  app.set_version_flag("--version", std::string(driftlab::kVersion));

  std::string subcommand;
  std::string config_path;
  bool print_config = false;
  bool quiet = false;
  std::string names;
  for (const auto& s : driftlab::subcommands()) names += (names.empty() ? "" : " | ") + s;
  app.add_option("subcommand", subcommand, names);
  app.add_option("--config", config_path, "flat key=value file; flags override it");
  app.add_flag("--print-config", print_config, "print the resolved config and exit");
  app.add_flag("--quiet", quiet, "no progress output");

  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  for (const auto& key : driftlab::config_keys()) {
    if (key == "subcommand") continue;
    const auto help = kHelp.find(key);
    options[key] = app.add_option("--" + key, values[key], help == kHelp.end() ? "" : help->second);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? driftlab::kExitOk : driftlab::kExitUsage;
  }

  try {
    driftlab::ExperimentConfig config;
    if (!config_path.empty()) config = driftlab::load_config_file(config_path);
    if (!subcommand.empty()) config.subcommand = subcommand;
    for (const auto& key : driftlab::config_keys()) {
      const auto it = options.find(key);
      if (it != options.end() && it->second->count() > 0) {
        driftlab::set_config_value(config, key, values[key]);
      }
    }
    if (print_config) {
      std::cout << driftlab::to_config_text(driftlab::resolve_defaults(config));
      return driftlab::kExitOk;
    }
    return driftlab::run_experiment(config, std::cout, std::cerr, !quiet);
  } catch (const driftlab::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return driftlab::kExitUsage;
  }
}
