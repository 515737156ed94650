#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "driftlab/csv.hpp"
#include "driftlab/drift_models.hpp"

namespace driftlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitAssertion = 3;

/// Invalid flags, keys or value combinations.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kBuiltinSeed = 20240607;

/// Seed used when none is configured: $DRIFTLAB_SEED if set, else kBuiltinSeed.
std::uint64_t default_seed();

/// Everything a subcommand needs. Empty lists and zero counts mean "use the
/// subcommand default" until resolve_defaults() fills them in.
struct ExperimentConfig {
  std::string subcommand;
  std::string drift = "weierstrass";  ///< weierstrass | weierstrass-sobolev | constant | zero
  std::optional<double> alpha;
  std::optional<double> beta;
  double constant = 1.0;
  double tail_tol = kDefaultTailTol;
  std::vector<double> p_list;
  std::vector<std::int64_t> n_list;
  std::int64_t reps = 0;
  std::int64_t master_ratio = 64;
  std::optional<std::uint64_t> seed;
  double x0 = 0.0;
  std::string output;
  int threads = 0;
  // spectral-identity
  std::vector<std::int64_t> j_list;
  std::vector<double> delta_list;
  double t_lo = 0.5;
  std::int64_t substeps = 1024;
  // rate-milstein and transform-check
  int nodes = 4096;
  double half_width = 8.0;
  std::int64_t pairs = 10000;
  // coupling-gap
  std::string grid_policy = "uniform-augmented";
  std::string grid_file;
  std::string path_dump;
  // regularity
  std::int64_t samples = 100000;
  // transform-check
  std::string table_csv;
  // opt-in assertions
  std::optional<std::pair<double, double>> expect_slope;
  std::optional<double> min_r2;
  std::optional<double> z_max;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Recognized subcommands, in documentation order.
const std::vector<std::string>& subcommands();

/// Keys accepted in config files and as --flags (same spelling).
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value; throws UsageError.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Every key that has a value, in config_keys() order.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config);

/// Flat "key=value" lines; '#' starts a comment line.
ExperimentConfig parse_config_text(const std::string& text);
std::string to_config_text(const ExperimentConfig& config);
ExperimentConfig load_config_file(const std::string& path);

/// Fills subcommand defaults and checks ranges; throws UsageError.
ExperimentConfig resolve_defaults(ExperimentConfig config);

/// Drift described by the config; throws UsageError if it is incomplete.
DriftModel make_model(const ExperimentConfig& config);

/// One line of a property report.
struct Check {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  std::string relation;  ///< "<=", ">=" or "info"
  bool pass = true;
};

/// Properties of the transform for `model`: round trip,
/// monotonicity, bi-Lipschitz sandwich, inverse slopes, bounds on b and b',
/// b' against central differences, and the constant-drift closed form.
std::vector<Check> transform_checks(const DriftModel& model, const ExperimentConfig& config);

/// Hoelder probes of mu_alpha at alpha and alpha + 0.3, the Gagliardo
/// estimate of the indicator of [0,1] at (0.25, 2) and (0.75, 2), and
/// probes of mu_{alpha,beta}.
std::vector<Check> regularity_checks(const ExperimentConfig& config);

/// Runs config.subcommand after resolve_defaults(), writes its CSV to
/// config.output and prints a summary to `out`. Usage errors, failed
/// assertions and progress go to `err`. Returns one of the kExit codes.
int run_experiment(const ExperimentConfig& config, std::ostream& out, std::ostream& err,
                   bool show_progress = true);

/// '#' header lines shared by all CSV outputs: version plus the full config
/// except execution-only keys (threads, output and dump paths).
Metadata config_metadata(const ExperimentConfig& config);

}  // namespace driftlab
