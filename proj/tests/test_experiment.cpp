#include <doctest.h>

#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "driftlab/experiment.hpp"

using namespace driftlab;
namespace fs = std::filesystem;

namespace {

struct ScratchDir {
  fs::path path;
  ScratchDir() : path(fs::temp_directory_path() / ("driftlab_test_experiment_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

fs::path scratch_dir() {
  static const ScratchDir dir;
  return dir.path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small(const std::string& sub, const std::string& name) {
  ExperimentConfig c;
  c.subcommand = sub;
  c.alpha = 0.5;
  c.seed = 3;
  c.threads = 2;
  c.output = (scratch_dir() / name).string();
  if (sub == "rate-euler" || sub == "rate-milstein" || sub == "coupling-gap") {
    c.n_list = {4, 8, 16};
    c.reps = 40;
  }
  if (sub == "spectral-identity") {
    c.j_list = {0, 2};
    c.delta_list = {0.1};
    c.reps = 200;
    c.substeps = 64;
  }
  if (sub == "transform-check") {
    c.nodes = 1024;
    c.pairs = 500;
  }
  return c;
}

int run(const ExperimentConfig& c, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int rc = run_experiment(c, out, err, false);
  if (out_text) *out_text = out.str();
  return rc;
}

}  // namespace

TEST_CASE("config text round trip") {
  ExperimentConfig c;
  c.subcommand = "coupling-gap";
  c.alpha = 0.35;
  c.beta = 1.5;
  c.p_list = {1.0, 2.0};
  c.n_list = {16, 32, 64};
  c.reps = 123;
  c.seed = 99;
  c.x0 = -0.25;
  c.output = "out.csv";
  c.j_list = {1, 4};
  c.delta_list = {0.05, 0.1};
  c.tail_tol = 1e-10;
  c.expect_slope = std::pair{0.6, 0.9};
  c.min_r2 = 0.95;
  c.z_max = 3.0;
  c.grid_file = "grids.txt";
  c.grid_policy = "user";
  const auto back = parse_config_text(to_config_text(c));
  CHECK(back == c);
  CHECK(parse_config_text(to_config_text(ExperimentConfig{})) == ExperimentConfig{});
  const auto resolved = resolve_defaults(small("rate-euler", "rt.csv"));
  CHECK(parse_config_text(to_config_text(resolved)) == resolved);
}

TEST_CASE("config text parsing") {
  const auto c = parse_config_text("# comment\nsubcommand=rate-euler\n\nalpha = 0.5\nn-list=16,32\n");
  CHECK(c.subcommand == "rate-euler");
  CHECK(c.alpha == 0.5);
  CHECK(c.n_list == std::vector<std::int64_t>{16, 32});
  CHECK_THROWS_AS(parse_config_text("bogus=1\n"), UsageError);
  CHECK_THROWS_AS(parse_config_text("alpha\n"), UsageError);
  CHECK_THROWS_AS(parse_config_text("alpha=half\n"), UsageError);
  CHECK_THROWS_AS(parse_config_text("reps=12x\n"), UsageError);
  CHECK_THROWS_AS(load_config_file((scratch_dir() / "missing.cfg").string()), UsageError);
}

TEST_CASE("flags override the config file") {
  const auto path = scratch_dir() / "base.cfg";
  {
    std::ofstream f(path);
    f << "subcommand=rate-euler\nalpha=0.3\nreps=50\n";
  }
  auto c = load_config_file(path.string());
  CHECK(c.alpha == 0.3);
  set_config_value(c, "alpha", "0.7");
  set_config_value(c, "threads", "2");
  CHECK(c.alpha == 0.7);
  CHECK(c.reps == 50);
  CHECK(c.threads == 2);
  CHECK_THROWS_AS(set_config_value(c, "no-such-key", "1"), UsageError);
}

TEST_CASE("default resolution and usage errors") {
  ExperimentConfig c;
  c.subcommand = "rate-euler";
  CHECK_THROWS_AS(resolve_defaults(c), UsageError);
  std::ostringstream out, err;
  CHECK(run_experiment(c, out, err, false) == kExitUsage);
  CHECK(err.str().find("alpha") != std::string::npos);

  c.alpha = 0.5;
  const auto r = resolve_defaults(c);
  CHECK(r.p_list == std::vector<double>{1.0});
  CHECK(r.n_list == std::vector<std::int64_t>{16, 32, 64, 128, 256, 512, 1024});
  CHECK(r.reps == 2000);
  CHECK(r.output == "rate-euler.csv");
  CHECK(r.seed.has_value());

  c.subcommand = "nonsense";
  CHECK_THROWS_AS(resolve_defaults(c), UsageError);
  c.subcommand = "rate-euler";
  c.alpha = 1.0;
  CHECK_THROWS_AS(resolve_defaults(c), UsageError);
  c.alpha = 0.5;
  c.master_ratio = 32;
  CHECK_THROWS_AS(resolve_defaults(c), UsageError);
  c.master_ratio = 64;
  c.drift = "weierstrass-sobolev";
  CHECK_THROWS_AS(resolve_defaults(c), UsageError);
  c.beta = 1.0;
  CHECK_NOTHROW(resolve_defaults(c));

  auto g = small("coupling-gap", "g.csv");
  g.grid_policy = "user";
  CHECK_THROWS_AS(resolve_defaults(g), UsageError);
  CHECK(run(g) == kExitUsage);
  g.grid_policy = "other";
  CHECK_THROWS_AS(resolve_defaults(g), UsageError);

  auto s = small("spectral-identity", "s.csv");
  s.delta_list = {0.6};
  CHECK_THROWS_AS(resolve_defaults(s), UsageError);

  ExperimentConfig constant;
  constant.subcommand = "transform-check";
  constant.drift = "constant";
  constant.constant = 0.5;
  CHECK_NOTHROW(resolve_defaults(constant));
  CHECK(make_model(resolve_defaults(constant)).kind() == DriftKind::constant);
}

TEST_CASE("seed falls back to the environment, then the built-in value") {
  ExperimentConfig c = small("rate-euler", "seed.csv");
  c.seed.reset();
  ::unsetenv("DRIFTLAB_SEED");
  CHECK(default_seed() == kBuiltinSeed);
  CHECK(resolve_defaults(c).seed == kBuiltinSeed);
  ::setenv("DRIFTLAB_SEED", "4242", 1);
  CHECK(default_seed() == 4242);
  CHECK(resolve_defaults(c).seed == 4242);
  c.seed = 5;
  CHECK(resolve_defaults(c).seed == 5);
  ::unsetenv("DRIFTLAB_SEED");
}

TEST_CASE("spectral-identity at j = 0 reports a zero row") {
  auto c = small("spectral-identity", "spec0.csv");
  c.j_list = {0};
  REQUIRE(run(c) == kExitOk);
  std::istringstream in(slurp(c.output));
  std::string line, last;
  while (std::getline(in, line)) last = line;
  CHECK(last.rfind("0,", 0) == 0);
  CHECK(last.substr(last.rfind(',') + 1) == "0");
}

TEST_CASE("every CSV embeds the configuration") {
  for (const auto& sub : subcommands()) {
    CAPTURE(sub);
    auto c = small(sub, sub + "_meta.csv");
    REQUIRE(run(c) == kExitOk);
    const auto text = slurp(c.output);
    CHECK(text.find("# driftlab_version=") != std::string::npos);
    for (const auto& [key, value] : config_entries(resolve_defaults(c))) {
      if (key == "threads" || key == "output" || key == "path-dump" || key == "table-csv") {
        CHECK(text.find("# " + key + "=") == std::string::npos);
      } else {
        CHECK(text.find("# " + key + "=" + value + "\n") != std::string::npos);
      }
    }
  }
}

TEST_CASE("repeat runs and thread counts give byte-identical CSV") {
  for (const auto& sub : subcommands()) {
    CAPTURE(sub);
    auto a = small(sub, sub + "_a.csv");
    auto b = small(sub, sub + "_b.csv");
    auto t = small(sub, sub + "_t.csv");
    a.threads = 1;
    b.threads = 1;
    t.threads = 3;
    std::string oa, ob;
    REQUIRE(run(a, &oa) == kExitOk);
    REQUIRE(run(b, &ob) == kExitOk);
    REQUIRE(run(t) == kExitOk);
    CHECK(slurp(a.output) == slurp(b.output));
    CHECK(slurp(a.output) == slurp(t.output));
  }
}

TEST_CASE("failed assertions exit with the assertion status") {
  auto c = small("rate-euler", "assert.csv");
  c.expect_slope = std::pair{5.0, 6.0};
  std::ostringstream out, err;
  CHECK(run_experiment(c, out, err, false) == kExitAssertion);
  CHECK(fs::exists(c.output));
  c.expect_slope.reset();
  c.min_r2 = 1.0;
  CHECK(run(c) == kExitAssertion);
  auto s = small("spectral-identity", "zmax.csv");
  s.z_max = 1e-9;
  s.j_list = {2};
  CHECK(run(s) == kExitAssertion);
}

TEST_CASE("transform-check and regularity pass their own checks") {
  const auto model = DriftModel::weierstrass(0.5);
  auto c = resolve_defaults(small("transform-check", "tc.csv"));
  for (const auto& k : transform_checks(model, c)) {
    CAPTURE(k.name);
    CHECK(k.pass);
  }
  const auto r = resolve_defaults(small("regularity", "reg.csv"));
  for (const auto& k : regularity_checks(r)) {
    CAPTURE(k.name);
    CHECK(k.pass);
  }
}

TEST_CASE("coupling-gap with user grids and a path dump") {
  const auto grids = scratch_dir() / "grids.txt";
  {
    std::ofstream f(grids);
    f << "# two grids\n0.25, 0.5, 0.75\n0.1 0.2 0.3 0.5 0.6 0.7 0.9\n";
  }
  auto c = small("coupling-gap", "user.csv");
  c.grid_policy = "user";
  c.grid_file = grids.string();
  c.n_list.clear();
  c.path_dump = (scratch_dir() / "path.csv").string();
  std::string out;
  REQUIRE(run(c, &out) == kExitOk);
  CHECK(out.find("lower_bound_proxy") != std::string::npos);
  const auto dump = slurp(c.path_dump);
  CHECK(dump.rfind("# ", 0) == 0);
  CHECK(dump.find("\nt,W,W_tilde\n") != std::string::npos);
}
