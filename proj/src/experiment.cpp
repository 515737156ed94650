#include "driftlab/experiment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>

#include "driftlab/brownian.hpp"
#include "driftlab/error_lab.hpp"
#include "driftlab/rng.hpp"
#include "driftlab/spectral.hpp"
#include "driftlab/transform.hpp"
#include "driftlab/version.hpp"

namespace driftlab {

namespace {

// Relative rounding allowance, in units of the double epsilon, for
// quantities recovered from a rounded value.
constexpr double kConditioning = 4.0 * std::numeric_limits<double>::epsilon();

// Stream family of the uniforms drawn by the property suites.
constexpr std::uint32_t kSuiteFamily = 0x5eed0001u;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) throw UsageError("--" + key + ": empty list entry in '" + value + "'");
    items.push_back(item);
  }
  if (items.empty()) throw UsageError("--" + key + ": empty list");
  return items;
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw UsageError("--" + key + ": expected a number, got '" + text + "'");
  }
  return out;
}

template <typename Int>
Int parse_integer(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw UsageError("--" + key + ": expected an integer, got '" + text + "'");
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split_list(key, value)) out.push_back(parse_double(key, item));
  return out;
}

std::vector<std::int64_t> parse_integers(const std::string& key, const std::string& value) {
  std::vector<std::int64_t> out;
  for (const auto& item : split_list(key, value)) out.push_back(parse_integer<std::int64_t>(key, item));
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_number(xs[i]);
  return s;
}

std::string join(const std::vector<std::int64_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

struct KeySpec {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::optional<std::string>(const ExperimentConfig&)> get;
};

std::optional<std::string> text_if(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

template <typename T>
std::optional<std::string> list_if(const std::vector<T>& xs) {
  if (xs.empty()) return std::nullopt;
  return join(xs);
}

std::optional<std::string> number_if(const std::optional<double>& x) {
  if (!x) return std::nullopt;
  return format_number(*x);
}

const std::vector<KeySpec>& key_specs() {
  using C = ExperimentConfig;
  using S = std::string;
  static const std::vector<KeySpec> specs = {
      {"subcommand", [](C& c, const S& v) { c.subcommand = trim(v); },
       [](const C& c) { return text_if(c.subcommand); }},
      {"drift", [](C& c, const S& v) { c.drift = trim(v); },
       [](const C& c) { return std::optional<S>(c.drift); }},
      {"alpha", [](C& c, const S& v) { c.alpha = parse_double("alpha", v); },
       [](const C& c) { return number_if(c.alpha); }},
      {"beta", [](C& c, const S& v) { c.beta = parse_double("beta", v); },
       [](const C& c) { return number_if(c.beta); }},
      {"constant", [](C& c, const S& v) { c.constant = parse_double("constant", v); },
       [](const C& c) { return std::optional<S>(format_number(c.constant)); }},
      {"tail-tol", [](C& c, const S& v) { c.tail_tol = parse_double("tail-tol", v); },
       [](const C& c) { return std::optional<S>(format_number(c.tail_tol)); }},
      {"p", [](C& c, const S& v) { c.p_list = parse_doubles("p", v); },
       [](const C& c) { return list_if(c.p_list); }},
      {"n-list", [](C& c, const S& v) { c.n_list = parse_integers("n-list", v); },
       [](const C& c) { return list_if(c.n_list); }},
      {"reps", [](C& c, const S& v) { c.reps = parse_integer<std::int64_t>("reps", v); },
       [](const C& c) { return c.reps ? std::optional<S>(std::to_string(c.reps)) : std::nullopt; }},
      {"master-ratio",
       [](C& c, const S& v) { c.master_ratio = parse_integer<std::int64_t>("master-ratio", v); },
       [](const C& c) { return std::optional<S>(std::to_string(c.master_ratio)); }},
      {"seed", [](C& c, const S& v) { c.seed = parse_integer<std::uint64_t>("seed", v); },
       [](const C& c) { return c.seed ? std::optional<S>(std::to_string(*c.seed)) : std::nullopt; }},
      {"x0", [](C& c, const S& v) { c.x0 = parse_double("x0", v); },
       [](const C& c) { return std::optional<S>(format_number(c.x0)); }},
      {"output", [](C& c, const S& v) { c.output = trim(v); },
       [](const C& c) { return text_if(c.output); }},
      {"threads", [](C& c, const S& v) { c.threads = parse_integer<int>("threads", v); },
       [](const C& c) { return std::optional<S>(std::to_string(c.threads)); }},
      {"j", [](C& c, const S& v) { c.j_list = parse_integers("j", v); },
       [](const C& c) { return list_if(c.j_list); }},
      {"delta", [](C& c, const S& v) { c.delta_list = parse_doubles("delta", v); },
       [](const C& c) { return list_if(c.delta_list); }},
      {"t-lo", [](C& c, const S& v) { c.t_lo = parse_double("t-lo", v); },
       [](const C& c) { return std::optional<S>(format_number(c.t_lo)); }},
      {"substeps", [](C& c, const S& v) { c.substeps = parse_integer<std::int64_t>("substeps", v); },
       [](const C& c) { return std::optional<S>(std::to_string(c.substeps)); }},
      {"nodes", [](C& c, const S& v) { c.nodes = parse_integer<int>("nodes", v); },
       [](const C& c) { return std::optional<S>(std::to_string(c.nodes)); }},
      {"half-width", [](C& c, const S& v) { c.half_width = parse_double("half-width", v); },
       [](const C& c) { return std::optional<S>(format_number(c.half_width)); }},
      {"pairs", [](C& c, const S& v) { c.pairs = parse_integer<std::int64_t>("pairs", v); },
       [](const C& c) { return std::optional<S>(std::to_string(c.pairs)); }},
      {"grid-policy", [](C& c, const S& v) { c.grid_policy = trim(v); },
       [](const C& c) { return std::optional<S>(c.grid_policy); }},
      {"grid-file", [](C& c, const S& v) { c.grid_file = trim(v); },
       [](const C& c) { return text_if(c.grid_file); }},
      {"path-dump", [](C& c, const S& v) { c.path_dump = trim(v); },
       [](const C& c) { return text_if(c.path_dump); }},
      {"samples", [](C& c, const S& v) { c.samples = parse_integer<std::int64_t>("samples", v); },
       [](const C& c) { return std::optional<S>(std::to_string(c.samples)); }},
      {"table-csv", [](C& c, const S& v) { c.table_csv = trim(v); },
       [](const C& c) { return text_if(c.table_csv); }},
      {"expect-slope",
       [](C& c, const S& v) {
         const auto xs = parse_doubles("expect-slope", v);
         if (xs.size() != 2) throw UsageError("--expect-slope: expected LO,HI");
         c.expect_slope = std::pair{xs[0], xs[1]};
       },
       [](const C& c) -> std::optional<S> {
         if (!c.expect_slope) return std::nullopt;
         return format_number(c.expect_slope->first) + "," + format_number(c.expect_slope->second);
       }},
      {"min-r2", [](C& c, const S& v) { c.min_r2 = parse_double("min-r2", v); },
       [](const C& c) { return number_if(c.min_r2); }},
      {"z-max", [](C& c, const S& v) { c.z_max = parse_double("z-max", v); },
       [](const C& c) { return number_if(c.z_max); }},
  };
  return specs;
}

bool execution_only(const std::string& key) {
  return key == "threads" || key == "output" || key == "path-dump" || key == "table-csv";
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

bool is_series(const std::string& drift) {
  return drift == "weierstrass" || drift == "weierstrass-sobolev";
}

template <typename T>
void default_list(std::vector<T>& xs, std::initializer_list<T> fallback) {
  if (xs.empty()) xs = fallback;
}

ProgressFn progress_printer(std::ostream* err, const std::string& label) {
  if (err == nullptr) return {};
  return [err, label, last = std::int64_t{-1}](std::int64_t done, std::int64_t total) mutable {
    const std::int64_t tenth = total > 0 ? done * 10 / total : 10;
    if (tenth == last) return;
    last = tenth;
    *err << label << ": " << done << '/' << total << '\n' << std::flush;
  };
}

template <typename Writer>
void write_file(const std::string& path, Writer&& writer) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  writer(file);
  file.flush();
  if (!file) throw std::runtime_error("failed writing '" + path + "'");
}

std::string fit_summary(const RateFit& fit) {
  std::ostringstream s;
  s << "slope=" << format_number(fit.slope) << " ci=[" << format_number(fit.slope_ci_lo) << ','
    << format_number(fit.slope_ci_hi) << "] r2=" << format_number(fit.r_squared)
    << " intercept=" << format_number(fit.intercept) << " dropped=" << fit.dropped;
  return s.str();
}

std::string fit_key(double p) { return "fit_p" + format_number(p); }

// Opt-in checks shared by the sweep subcommands.
bool assert_fits(const ExperimentConfig& config, const SweepResult& result, std::ostream& out) {
  bool ok = true;
  const auto report = [&](const std::string& what, bool pass) {
    out << "assert " << what << ": " << (pass ? "pass" : "FAIL") << '\n';
    ok = ok && pass;
  };
  if (!config.expect_slope && !config.min_r2) return true;
  if (result.fits.size() != config.p_list.size()) report("rate fit available for every p", false);
  for (std::size_t i = 0; i < result.fits.size(); ++i) {
    const auto& fit = result.fits[i];
    const std::string p = format_number(result.fit_p[i]);
    if (config.expect_slope) {
      const auto [lo, hi] = *config.expect_slope;
      report("p=" + p + " slope " + format_number(fit.slope) + " in [" + format_number(lo) + "," +
                 format_number(hi) + "]",
             fit.slope >= lo && fit.slope <= hi);
    }
    if (config.min_r2) {
      report("p=" + p + " r2 " + format_number(fit.r_squared) + " >= " + format_number(*config.min_r2),
             fit.r_squared >= *config.min_r2);
    }
  }
  return ok;
}

void print_estimates(const SweepResult& result, std::ostream& out, bool half_gap) {
  for (const auto& e : result.estimates) {
    out << "n=" << e.n << " p=" << format_number(e.p) << " error=" << format_number(e.mean_error)
        << " se=" << format_number(e.std_error) << " M=" << e.replications
        << " breaches=" << e.range_breaches;
    if (half_gap) out << " lower_bound_proxy=" << format_number(0.5 * e.mean_error);
    out << '\n';
  }
  for (std::size_t i = 0; i < result.fits.size(); ++i) {
    out << "fit p=" << format_number(result.fit_p[i]) << ' ' << fit_summary(result.fits[i]) << '\n';
  }
}

SweepConfig sweep_config(const ExperimentConfig& config, std::ostream* err) {
  SweepConfig sc;
  sc.n_list = config.n_list;
  sc.p_list = config.p_list;
  sc.replications = config.reps;
  sc.seed = *config.seed;
  sc.x0 = config.x0;
  sc.master_ratio = config.master_ratio;
  sc.threads = config.threads;
  sc.half_width = config.half_width;
  sc.transform.nodes = config.nodes;
  sc.progress = progress_printer(err, config.subcommand);
  return sc;
}

int run_rate(const ExperimentConfig& config, std::ostream& out, std::ostream* err) {
  const auto model = make_model(config);
  const auto scheme =
      config.subcommand == "rate-euler" ? SchemeKind::euler : SchemeKind::milstein_transformed;
  const auto result = scheme_error_sweep(model, scheme, sweep_config(config, err));

  Metadata meta = config_metadata(config);
  meta.emplace_back("scheme", to_string(scheme));
  meta.emplace_back("model", model.describe());
  meta.emplace_back("master_n", std::to_string(result.master_n));
  meta.emplace_back("range_breaches", std::to_string(result.range_breaches));
  if (scheme == SchemeKind::milstein_transformed) {
    meta.emplace_back("transform_interp_error", format_number(result.transform_interp_error));
  }
  for (std::size_t i = 0; i < result.fits.size(); ++i) {
    meta.emplace_back(fit_key(result.fit_p[i]), fit_summary(result.fits[i]));
  }
  write_file(config.output, [&](std::ostream& f) { write_sweep_csv(f, result, meta, *config.seed); });

  out << config.subcommand << ' ' << model.describe() << " master_n=" << result.master_n << '\n';
  print_estimates(result, out, false);
  out << "csv=" << config.output << '\n';
  return assert_fits(config, result, out) ? kExitOk : kExitAssertion;
}

std::vector<TimeGrid> read_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("--grid-file: cannot read '" + path + "'");
  std::vector<TimeGrid> grids;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::vector<double> times;
    std::istringstream items(line);
    for (std::string item; items >> item;) times.push_back(parse_double("grid-file", item));
    try {
      grids.push_back(plain_grid(std::move(times)));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--grid-file: ") + e.what());
    }
  }
  if (grids.empty()) throw UsageError("--grid-file: no grids in '" + path + "'");
  return grids;
}

// Smallest k * ratio * (largest grid size) on whose uniform grid every user
// grid point lies.
std::int64_t user_master_n(const std::vector<TimeGrid>& grids, std::int64_t ratio) {
  const std::int64_t base = ratio * static_cast<std::int64_t>(grids.back().size());
  for (std::int64_t k = 1; k <= 4096; ++k) {
    const std::int64_t n = base * k;
    bool nested = true;
    for (const auto& g : grids) {
      try {
        nesting_indices(g, n);
      } catch (const std::invalid_argument&) {
        nested = false;
        break;
      }
    }
    if (nested) return n;
  }
  throw UsageError("--grid-file: grid points are not multiples of 1/N for any N = k * " +
                   std::to_string(base) + " with k <= 4096");
}

int run_coupling(const ExperimentConfig& config, std::ostream& out, std::ostream* err) {
  const auto model = make_model(config);
  SweepConfig sc = sweep_config(config, err);
  const bool user = config.grid_policy == "user";
  if (user) {
    sc.grid_policy = GridPolicy::user;
    sc.user_grids = read_grid_file(config.grid_file);
    sc.master_n = user_master_n(sc.user_grids, config.master_ratio);
  }
  const auto result = coupling_gap_sweep(model, sc);

  Metadata meta = config_metadata(config);
  meta.emplace_back("scheme", to_string(SchemeKind::reference_euler));
  meta.emplace_back("model", model.describe());
  meta.emplace_back("grid_class", user ? "plain" : "augmented");
  meta.emplace_back("master_n", std::to_string(result.master_n));
  for (std::size_t i = 0; i < result.fits.size(); ++i) {
    meta.emplace_back(fit_key(result.fit_p[i]), fit_summary(result.fits[i]));
  }
  write_file(config.output, [&](std::ostream& f) { write_sweep_csv(f, result, meta, *config.seed); });

  if (!config.path_dump.empty()) {
    const TimeGrid pi = user ? sc.user_grids.back() : make_augmented_grid(static_cast<int>(config.n_list.back()));
    const auto tag = user ? static_cast<std::uint32_t>(sc.user_grids.size() - 1)
                          : static_cast<std::uint32_t>(config.n_list.back());
    const auto pair = sample_coupled_pair(result.master_n, pi, {*config.seed, 0, roles::brownian, 0}, tag);
    write_file(config.path_dump, [&](std::ostream& f) {
      Metadata dump = config_metadata(config);
      dump.emplace_back("replication", "0");
      dump.emplace_back("grid_points", std::to_string(pi.size()));
      write_metadata(f, dump);
      write_path_csv(f, pair);
    });
  }

  out << "coupling-gap " << model.describe() << " grid_policy=" << config.grid_policy
      << " master_n=" << result.master_n << '\n';
  out << "lower_bound_proxy = gap/2 bounds the error of any method using the grid points\n";
  print_estimates(result, out, true);
  out << "csv=" << config.output << '\n';
  if (!config.path_dump.empty()) out << "path_dump=" << config.path_dump << '\n';
  return assert_fits(config, result, out) ? kExitOk : kExitAssertion;
}

int run_spectral(const ExperimentConfig& config, std::ostream& out, std::ostream* err) {
  const auto model = make_model(config);
  std::vector<GhatResult> rows;
  std::uint32_t cell = 0;
  const auto cells = config.j_list.size() * config.delta_list.size();
  for (auto j : config.j_list) {
    for (double delta : config.delta_list) {
      GhatOptions opts;
      opts.replications = config.reps;
      opts.seed = *config.seed;
      opts.substeps = config.substeps;
      opts.threads = config.threads;
      opts.stream_family = cell++;
      rows.push_back(ghat_identity_mc(model, j, config.t_lo, config.t_lo + delta, opts));
      rows.back().delta = delta;
      if (err) *err << "spectral-identity: cell " << cell << '/' << cells << '\n' << std::flush;
    }
  }
  Metadata meta = config_metadata(config);
  meta.emplace_back("model", model.describe());
  write_file(config.output, [&](std::ostream& f) { write_ghat_csv(f, rows, meta); });

  out << "spectral-identity " << model.describe() << '\n';
  bool ok = true;
  for (const auto& r : rows) {
    out << "j=" << r.j << " delta=" << format_number(r.delta) << " mc=" << format_number(r.mc_estimate)
        << " closed=" << format_number(r.closed_form) << " se=" << format_number(r.std_error)
        << " z=" << format_number(r.z_score) << '\n';
    if (config.z_max) {
      const bool pass = std::fabs(r.z_score) <= *config.z_max;
      out << "assert j=" << r.j << " delta=" << format_number(r.delta) << " |z| <= "
          << format_number(*config.z_max) << ": " << (pass ? "pass" : "FAIL") << '\n';
      ok = ok && pass;
    }
  }
  out << "csv=" << config.output << '\n';
  return ok ? kExitOk : kExitAssertion;
}

void write_checks_csv(std::ostream& f, const std::vector<Check>& checks, const Metadata& meta) {
  write_metadata(f, meta);
  f << "check,value,limit,relation,pass\n";
  for (const auto& c : checks) {
    f << c.name << ',' << format_number(c.value) << ',' << format_number(c.limit) << ',' << c.relation
      << ',' << (c.pass ? 1 : 0) << '\n';
  }
}

int report_checks(const ExperimentConfig& config, const std::vector<Check>& checks, Metadata meta,
                  std::ostream& out) {
  write_file(config.output, [&](std::ostream& f) { write_checks_csv(f, checks, meta); });
  bool ok = true;
  for (const auto& c : checks) {
    out << c.name << ' ' << format_number(c.value);
    if (c.relation != "info") {
      out << ' ' << c.relation << ' ' << format_number(c.limit) << ' ' << (c.pass ? "pass" : "FAIL");
    }
    out << '\n';
    ok = ok && c.pass;
  }
  out << "csv=" << config.output << '\n';
  return ok ? kExitOk : kExitAssertion;
}

int run_transform(const ExperimentConfig& config, std::ostream& out) {
  const auto model = make_model(config);
  const auto checks = transform_checks(model, config);
  if (!config.table_csv.empty()) {
    const auto table = build_transform(model, default_working_interval(config.x0, config.half_width),
                                       {.nodes = config.nodes});
    write_file(config.table_csv, [&](std::ostream& f) { table.write_csv(f); });
  }
  Metadata meta = config_metadata(config);
  meta.emplace_back("model", model.describe());
  out << "transform-check " << model.describe() << '\n';
  return report_checks(config, checks, meta, out);
}

int run_regularity(const ExperimentConfig& config, std::ostream& out) {
  const auto checks = regularity_checks(config);
  out << "regularity alpha=" << format_number(*config.alpha) << " beta=" << format_number(*config.beta)
      << '\n';
  return report_checks(config, checks, config_metadata(config), out);
}

Check bound(std::string name, double value, const std::string& relation, double limit) {
  const bool pass = relation == "<=" ? value <= limit : relation == ">=" ? value >= limit : true;
  return {std::move(name), value, limit, relation, pass};
}

Check info(std::string name, double value) { return {std::move(name), value, 0.0, "info", true}; }

// Uniform draws on [lo, hi] from a counter stream.
class Uniforms {
 public:
  Uniforms(std::uint64_t seed, std::uint32_t role) : stream_({seed, 0, role, kSuiteFamily}) {}
  double next(double lo, double hi) {
    if (half_ == 0) pair_ = stream_.uniforms(block_++);
    const double u = pair_[static_cast<std::size_t>(half_)];
    half_ ^= 1;
    return lo + (hi - lo) * u;
  }

 private:
  CounterStream stream_;
  std::array<double, 2> pair_{};
  std::uint64_t block_ = 0;
  int half_ = 0;
};

// Lower estimate of the Hoelder-alpha constant of the drift on a period
// (or on its support).
double drift_holder(const DriftModel& model, std::uint64_t seed) {
  const Interval domain =
      model.support().value_or(Interval{0.0, 2.0 * std::numbers::pi});
  return holder_seminorm_probe([&](double x) { return model(x); }, model.alpha(), domain, 10000, seed);
}

double ratio(double a, double b) { return b != 0.0 ? a / b : std::numeric_limits<double>::infinity(); }

}  // namespace

std::uint64_t default_seed() {
  const char* env = std::getenv("DRIFTLAB_SEED");
  if (env == nullptr || *env == '\0') return kBuiltinSeed;
  try {
    return parse_integer<std::uint64_t>("seed", env);
  } catch (const UsageError&) {
    throw UsageError(std::string("DRIFTLAB_SEED: expected an unsigned integer, got '") + env + "'");
  }
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"rate-euler",        "rate-milstein",   "coupling-gap",
                                                 "spectral-identity", "transform-check", "regularity"};
  return names;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& spec : key_specs()) out.push_back(spec.name);
    return out;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  for (const auto& spec : key_specs()) {
    if (spec.name == key) {
      spec.set(config, value);
      return;
    }
  }
  throw UsageError("unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& spec : key_specs()) {
    if (auto v = spec.get(config)) out.emplace_back(spec.name, *v);
  }
  return out;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(number) + ": expected key=value");
    }
    set_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return config;
}

std::string to_config_text(const ExperimentConfig& config) {
  std::string text;
  for (const auto& [key, value] : config_entries(config)) text += key + "=" + value + "\n";
  return text;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

ExperimentConfig resolve_defaults(ExperimentConfig c) {
  const auto& names = subcommands();
  require(!c.subcommand.empty(), "missing subcommand");
  require(std::find(names.begin(), names.end(), c.subcommand) != names.end(),
          "unknown subcommand '" + c.subcommand + "'");
  require(c.drift == "weierstrass" || c.drift == "weierstrass-sobolev" || c.drift == "constant" ||
              c.drift == "zero",
          "--drift must be weierstrass, weierstrass-sobolev, constant or zero");

  const std::string& sub = c.subcommand;
  const bool regularity = sub == "regularity";
  if (is_series(c.drift) || regularity) require(c.alpha.has_value(), "--alpha is required");
  if (c.alpha) require(*c.alpha > 0.0 && *c.alpha < 1.0, "--alpha must lie in (0,1)");
  if (c.drift == "weierstrass-sobolev") require(c.beta.has_value(), "--beta is required for weierstrass-sobolev");
  if (regularity && !c.beta) c.beta = 1.0;
  if (c.beta) require(*c.beta >= 0.0, "--beta must be >= 0");
  require(c.tail_tol > 0.0 && c.tail_tol < 1.0, "--tail-tol must lie in (0,1)");
  if (!c.seed) c.seed = default_seed();
  if (c.output.empty()) c.output = sub + ".csv";
  require(c.threads >= 0, "--threads must be >= 0");
  require(c.master_ratio >= kMinReferenceRatio,
          "--master-ratio must be at least " + std::to_string(kMinReferenceRatio));
  require(c.nodes >= 64, "--nodes must be >= 64");
  require(c.half_width > 0.0, "--half-width must be positive");
  require(c.pairs >= 10, "--pairs must be >= 10");
  require(c.samples >= 1000, "--samples must be >= 1000");
  require(c.substeps >= 2, "--substeps must be >= 2");
  require(c.grid_policy == "uniform-augmented" || c.grid_policy == "user",
          "--grid-policy must be uniform-augmented or user");
  if (c.expect_slope) require(c.expect_slope->first <= c.expect_slope->second, "--expect-slope: LO > HI");
  if (c.min_r2) require(*c.min_r2 >= 0.0 && *c.min_r2 <= 1.0, "--min-r2 must lie in [0,1]");
  if (c.z_max) require(*c.z_max > 0.0, "--z-max must be positive");

  if (sub == "rate-euler" || sub == "rate-milstein" || sub == "coupling-gap") {
    default_list(c.p_list, {1.0});
    for (double p : c.p_list) require(p >= 1.0, "--p values must be >= 1");
    if (sub == "coupling-gap") {
      default_list<std::int64_t>(c.n_list, {16, 32, 64, 128, 256});
      if (c.reps == 0) c.reps = 4000;
    } else {
      default_list<std::int64_t>(c.n_list, {16, 32, 64, 128, 256, 512, 1024});
      if (c.reps == 0) c.reps = 2000;
    }
    for (auto n : c.n_list) require(n >= 1, "--n-list values must be positive");
    require(std::is_sorted(c.n_list.begin(), c.n_list.end()) &&
                std::adjacent_find(c.n_list.begin(), c.n_list.end()) == c.n_list.end(),
            "--n-list must be strictly increasing");
    require(c.reps >= 2, "--reps must be >= 2");
    if (sub == "coupling-gap" && c.grid_policy == "user") {
      require(!c.grid_file.empty(), "--grid-policy user needs --grid-file");
    }
  }
  if (sub == "spectral-identity") {
    default_list<std::int64_t>(c.j_list, {1, 2, 4});
    default_list(c.delta_list, {0.05, 0.1});
    if (c.reps == 0) c.reps = 10000;
    require(c.reps >= 100, "--reps must be >= 100 for spectral-identity");
    for (auto j : c.j_list) require(j >= 0, "--j values must be >= 0");
    require(c.t_lo >= 0.0 && c.t_lo < 1.0, "--t-lo must lie in [0,1)");
    for (double d : c.delta_list) {
      require(d > 0.0 && c.t_lo + d <= 1.0, "--delta values must satisfy 0 < delta <= 1 - t-lo");
    }
  }
  return c;
}

DriftModel make_model(const ExperimentConfig& c) {
  if (c.drift == "weierstrass") {
    require(c.alpha.has_value(), "--alpha is required");
    return DriftModel::weierstrass(*c.alpha, c.tail_tol);
  }
  if (c.drift == "weierstrass-sobolev") {
    require(c.alpha.has_value() && c.beta.has_value(), "--alpha and --beta are required");
    return DriftModel::weierstrass_sobolev(*c.alpha, *c.beta, c.tail_tol);
  }
  if (c.drift == "constant") return DriftModel::constant(c.constant);
  if (c.drift == "zero") return DriftModel::zero();
  throw UsageError("unknown drift '" + c.drift + "'");
}

Metadata config_metadata(const ExperimentConfig& config) {
  Metadata meta;
  meta.emplace_back("driftlab_version", kVersion);
  for (const auto& [key, value] : config_entries(config)) {
    if (!execution_only(key)) meta.emplace_back(key, value);
  }
  return meta;
}

std::vector<Check> transform_checks(const DriftModel& model, const ExperimentConfig& config) {
  const std::uint64_t seed = config.seed.value_or(default_seed());
  const auto table = build_transform(model, default_working_interval(config.x0, config.half_width),
                                     {.nodes = config.nodes});
  const Interval dom = table.working_interval();
  const Interval img = table.image();
  const double c1 = table.c1();
  const double c2 = table.c2();
  const double mu_sup = model.sup_bound();
  std::vector<Check> checks;

  checks.push_back(info("sup_abs_t", table.sup_abs_t()));
  checks.push_back(info("c1", c1));
  checks.push_back(info("c2", c2));
  const double g_scale = std::max({1.0, std::fabs(table.image().lo), std::fabs(table.image().hi)});
  checks.push_back(bound("interpolation_error_relative", table.interpolation_error() / g_scale, "<=", 1e-6));
  checks.push_back(bound("origin_fixed",
                         std::fabs(table.forward(0.0)) + std::fabs(table.t_values()[table.zero_index()]),
                         "<=", 0.0));
  if (model.kind() == DriftKind::weierstrass) {
    checks.push_back(bound("sup_abs_t_vs_2pi_sup_mu", table.sup_abs_t(), "<=",
                           2.0 * std::numbers::pi * mu_sup));
  }

  {
    Uniforms u(seed, 1);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double x = u.next(dom.lo, dom.hi);
      // Beyond what the rounding of y = G(x) alone can cause.
      const double y = table.forward(x);
      const double floor = kConditioning * std::max(1.0, std::fabs(y)) / table.derivative(x);
      worst = std::max(worst, std::fabs(table.inverse(y) - x) - floor);
    }
    checks.push_back(bound("round_trip_excess_error", worst, "<=", 1e-8));
    double residual = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double y = u.next(img.lo, img.hi);
      residual = std::max(residual, std::fabs(table.forward(table.inverse(y)) - y) / (1.0 + std::fabs(y)));
    }
    checks.push_back(bound("inverse_residual", residual, "<=", 1e-10));
  }
  {
    Uniforms u(seed, 2);
    std::vector<double> xs(1000);
    for (auto& x : xs) x = u.next(dom.lo, dom.hi);
    std::sort(xs.begin(), xs.end());
    double violations = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (xs[i] > xs[i - 1] && !(table.forward(xs[i]) > table.forward(xs[i - 1]))) violations += 1.0;
    }
    checks.push_back(bound("monotone_violations", violations, "<=", 0.0));
  }
  {
    const auto& xs = table.nodes();
    const auto& gs = table.g_values();
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      const double s = (gs[i] - gs[i - 1]) / (xs[i] - xs[i - 1]);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    checks.push_back(bound("node_slope_min", lo, ">=", c1));
    checks.push_back(bound("node_slope_max", hi, "<=", c2));
  }
  {
    // Difference quotients of pairs closer than kMinSeparation times the
    // width are dominated by rounding; for the others the relative rounding
    // error stays below kRatioRounding.
    constexpr double kMinSeparation = 1e-6;
    constexpr double kRatioRounding = 1e-9;
    Uniforms u(seed, 3);
    double g_lo = std::numeric_limits<double>::infinity(), g_hi = 0.0;
    double inv_lo = std::numeric_limits<double>::infinity(), inv_hi = 0.0;
    double b_lo = std::numeric_limits<double>::infinity(), b_hi = 0.0;
    double bp_max = 0.0, b_lip = 0.0;
    for (std::int64_t i = 0; i < config.pairs; ++i) {
      const double x = u.next(dom.lo, dom.hi);
      const double x2 = u.next(dom.lo, dom.hi);
      if (std::fabs(x - x2) >= kMinSeparation * dom.width()) {
        const double r = std::fabs(table.forward(x) - table.forward(x2)) / std::fabs(x - x2);
        g_lo = std::min(g_lo, r);
        g_hi = std::max(g_hi, r);
      }
      const double y = u.next(img.lo, img.hi);
      const double y2 = u.next(img.lo, img.hi);
      const auto d = table.diffusion(y);
      const auto d2 = table.diffusion(y2);
      b_lo = std::min({b_lo, d.b, d2.b});
      b_hi = std::max({b_hi, d.b, d2.b});
      bp_max = std::max({bp_max, std::fabs(d.b_prime), std::fabs(d2.b_prime)});
      if (std::fabs(y - y2) >= kMinSeparation * img.width()) {
        const double r = std::fabs(d.x - d2.x) / std::fabs(y - y2);
        inv_lo = std::min(inv_lo, r);
        inv_hi = std::max(inv_hi, r);
        b_lip = std::max(b_lip, std::fabs(d.b - d2.b) / std::fabs(y - y2));
      }
    }
    checks.push_back(bound("bilipschitz_min_ratio", g_lo, ">=", c1 * (1.0 - kRatioRounding)));
    checks.push_back(bound("bilipschitz_max_ratio", g_hi, "<=", c2 * (1.0 + kRatioRounding)));
    checks.push_back(bound("inverse_slope_min", inv_lo, ">=", (1.0 - kRatioRounding) / c2));
    checks.push_back(bound("inverse_slope_max", inv_hi, "<=", (1.0 + kRatioRounding) / c1));
    checks.push_back(bound("b_min", b_lo, ">=", c1));
    checks.push_back(bound("b_max", b_hi, "<=", c2));
    checks.push_back(bound("b_prime_max_abs", bp_max, "<=", 2.0 * mu_sup));
    checks.push_back(bound("b_lipschitz", b_lip, "<=", 2.0 * mu_sup * c2 / c1));
  }
  {
    // Central differences of b at h = 2^-10, 2^-13, 2^-16 on the inner
    // three quarters of the image. The order comes with a jackknife
    // standard error over 20 batches of the sampled y.
    Uniforms u(seed, 4);
    const double margin = dom.width() / 8.0;
    const double y_lo = table.forward(dom.lo + margin);
    const double y_hi = table.forward(dom.hi - margin);
    constexpr std::size_t kSamples = 4000;
    constexpr std::size_t kBatches = 20;
    const std::array<int, 3> exponents = {10, 13, 16};
    std::vector<double> ys(kSamples);
    for (auto& y : ys) y = u.next(y_lo, y_hi);
    std::array<std::vector<double>, 3> errs;
    double worst_mid = 0.0;
    for (std::size_t k = 0; k < exponents.size(); ++k) {
      const double h = std::ldexp(1.0, -exponents[k]);
      for (double y : ys) {
        const double fd = (table.diffusion_b(y + h) - table.diffusion_b(y - h)) / (2.0 * h);
        errs[k].push_back(std::fabs(fd - table.diffusion_b_prime(y)));
      }
      if (k == 1) worst_mid = *std::max_element(errs[k].begin(), errs[k].end());
    }
    const auto order_without = [&](std::size_t skip) {
      std::vector<RatePoint> pts;
      for (std::size_t k = 0; k < exponents.size(); ++k) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < kSamples; ++i) {
          if (i * kBatches / kSamples == skip) continue;
          sum += errs[k][i];
          ++count;
        }
        pts.push_back({std::ldexp(1.0, exponents[k]), sum / static_cast<double>(count)});
      }
      return rate_fit(pts).slope;
    };
    const bool rough = model.kind() == DriftKind::weierstrass || model.kind() == DriftKind::weierstrass_sobolev;
    if (rough) {
      const double a = model.alpha();
      const double order = order_without(kBatches);
      std::vector<double> partial;
      for (std::size_t b = 0; b < kBatches; ++b) partial.push_back(order_without(b));
      double mean = 0.0;
      for (double v : partial) mean += v / kBatches;
      double ss = 0.0;
      for (double v : partial) ss += (v - mean) * (v - mean);
      const double se = std::sqrt(ss * (kBatches - 1.0) / kBatches);
      checks.push_back(info("b_prime_fd_order", order));
      checks.push_back(info("b_prime_fd_order_se", se));
      checks.push_back(bound("b_prime_fd_order_plus_3se", order + 3.0 * se, ">=", a));
      const double h = std::ldexp(1.0, -exponents[1]);
      const double holder = drift_holder(model, seed);
      checks.push_back(info("drift_holder_probe", holder));
      checks.push_back(bound("b_prime_fd_holder_constant", worst_mid / std::pow(h, a), "<=",
                             2.0 * holder * std::pow(1.0 / c1, a)));
    } else {
      const double h = std::ldexp(1.0, -exponents[1]);
      double excess = 0.0;
      for (std::size_t i = 0; i < kSamples; ++i) {
        // b = exp(-2T) inherits the rounding of T with a factor 2|T|.
        const auto d = table.diffusion(ys[i]);
        const double t = std::fabs(model.primitive(d.x));
        const double floor = kConditioning * (1.0 + 2.0 * t) * std::max(1.0, d.b) / h;
        excess = std::max(excess, errs[1][i] - floor);
      }
      checks.push_back(bound("b_prime_fd_excess_error", excess, "<=", 1e-6));
      double off = 0.0;
      for (double y : ys) off = std::max(off, std::fabs(table.diffusion_b_prime(y) + 2.0 * model.constant_value()));
      checks.push_back(bound("b_prime_constant", off, "<=", 1e-12));
    }
  }
  {
    const double c = model.kind() == DriftKind::constant && model.constant_value() != 0.0
                         ? model.constant_value()
                         : 1.0;
    const auto flat = build_transform(DriftModel::constant(c), {-2.0, 2.0}, {.nodes = config.nodes});
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double x = -2.0 + 4.0 * (i + 0.5) / 100.0;
      worst = std::max(worst, std::fabs(flat.forward(x) + std::expm1(-2.0 * c * x) / (2.0 * c)));
    }
    checks.push_back(bound("constant_closed_form_error", worst, "<=", 1e-8));
    const auto unit = build_transform(DriftModel::constant(1.0), {-2.0, 2.0}, {.nodes = config.nodes});
    checks.push_back(bound("constant_inverse_at_one",
                           std::fabs(unit.inverse(-std::expm1(-2.0) / 2.0) - 1.0), "<=", 1e-8));
  }
  return checks;
}

std::vector<Check> regularity_checks(const ExperimentConfig& config) {
  const std::uint64_t seed = config.seed.value_or(default_seed());
  require(config.alpha.has_value(), "--alpha is required");
  const double alpha = *config.alpha;
  const double beta = config.beta.value_or(1.0);
  const auto mu = DriftModel::weierstrass(alpha, config.tail_tol);
  const auto mu_ab = DriftModel::weierstrass_sobolev(alpha, beta, config.tail_tol);
  const Interval period{0.0, 2.0 * std::numbers::pi};
  const Interval support = *mu_ab.support();
  const std::vector<std::int64_t> levels = {config.samples / 100, config.samples / 10, config.samples};
  std::vector<Check> checks;

  const auto holder_series = [&](const std::string& label, const DriftModel& model, double exponent,
                                 Interval domain) {
    std::vector<double> values;
    for (auto m : levels) {
      values.push_back(holder_seminorm_probe([&](double x) { return model(x); }, exponent, domain, m, seed));
      checks.push_back(info(label + "_samples" + std::to_string(m), values.back()));
    }
    return values;
  };

  // Stable: the last tenfold increase of the sample size moves the probe by
  // at most 10%. Divergent: every tenfold increase grows it by at least 50%.
  const auto v_a = holder_series("holder_mu_alpha", mu, alpha, period);
  checks.push_back(bound("holder_mu_alpha_stable_ratio", ratio(v_a[2], v_a[1]), "<=", 1.1));
  const auto v_b = holder_series("holder_mu_alpha_plus_0.3", mu, alpha + 0.3, period);
  checks.push_back(bound("holder_mu_alpha_plus_0.3_divergent_ratio",
                         std::min(ratio(v_b[1], v_b[0]), ratio(v_b[2], v_b[1])), ">=", 1.5));
  const auto v_c = holder_series("holder_mu_alpha_beta", mu_ab, alpha, support);
  checks.push_back(bound("holder_mu_alpha_beta_stable_ratio", ratio(v_c[2], v_c[1]), "<=", 1.1));

  // Gagliardo estimates of the indicator of [0,1] under grid doubling.
  const auto indicator = [](double x) { return x >= 0.0 && x <= 1.0 ? 1.0 : 0.0; };
  const std::vector<int> grids = {128, 256, 512, 1024, 2048};
  const auto gagliardo_series = [&](const std::string& label, const RealFunction& f, double a, Interval supp,
                                    const std::vector<int>& ns) {
    std::vector<double> values;
    for (int n : ns) {
      values.push_back(gagliardo_seminorm(f, a, 2.0, supp, n));
      checks.push_back(info(label + "_grid" + std::to_string(n), values.back()));
    }
    return values;
  };
  const auto g_lo = gagliardo_series("gagliardo_indicator_a0.25", indicator, 0.25, {0.0, 1.0}, grids);
  const double exact = 2.0 / (0.25 * (1.0 - 2.0 * 0.25));
  checks.push_back(bound("gagliardo_indicator_a0.25_stable_ratio",
                         ratio(g_lo.back(), g_lo[g_lo.size() - 2]), "<=", 1.05));
  checks.push_back(bound("gagliardo_indicator_a0.25_relative_to_exact",
                         std::fabs(g_lo.back() - exact) / exact, "<=", 0.1));
  const auto g_hi = gagliardo_series("gagliardo_indicator_a0.75", indicator, 0.75, {0.0, 1.0}, grids);
  double growth = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < g_hi.size(); ++i) growth = std::min(growth, ratio(g_hi[i], g_hi[i - 1]));
  checks.push_back(bound("gagliardo_indicator_a0.75_divergent_ratio", growth, ">=", 1.25));

  gagliardo_series("gagliardo_mu_alpha_beta", [&](double x) { return mu_ab(x); }, alpha, support,
                   {128, 256, 512});
  return checks;
}

int run_experiment(const ExperimentConfig& raw, std::ostream& out, std::ostream& err, bool show_progress) {
  try {
    const ExperimentConfig config = resolve_defaults(raw);
    std::ostream* progress = show_progress ? &err : nullptr;
    const std::string& sub = config.subcommand;
    int status = kExitOk;
    if (sub == "rate-euler" || sub == "rate-milstein") {
      status = run_rate(config, out, progress);
    } else if (sub == "coupling-gap") {
      status = run_coupling(config, out, progress);
    } else if (sub == "spectral-identity") {
      status = run_spectral(config, out, progress);
    } else if (sub == "transform-check") {
      status = run_transform(config, out);
    } else {
      status = run_regularity(config, out);
    }
    if (status == kExitAssertion) err << sub << ": assertion failed\n";
    return status;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace driftlab
