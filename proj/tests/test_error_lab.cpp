#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftlab/error_lab.hpp"

using namespace driftlab;

namespace {

SweepConfig small_config(std::vector<std::int64_t> ns, std::int64_t reps, std::uint64_t seed = 2) {
  SweepConfig c;
  c.n_list = std::move(ns);
  c.replications = reps;
  c.seed = seed;
  c.threads = 2;
  return c;
}

}  // namespace

TEST_CASE("Lp estimate and its batch jackknife") {
  std::mt19937_64 gen(1);
  std::exponential_distribution<double> ex(2.0);
  std::vector<double> e(1000);
  for (auto& v : e) v = ex(gen);

  for (double p : {1.0, 2.0, 4.0}) {
    double s = 0.0;
    for (double v : e) s += std::pow(v, p);
    const auto est = estimate_lp(e, p);
    CHECK(est.mean_error == doctest::Approx(std::pow(s / 1000.0, 1.0 / p)).epsilon(1e-13));
    CHECK(est.replications == 1000);
    CHECK(est.std_error > 0.0);
  }

  // For p = 1 and equal batches the jackknife equals the batch-means standard error.
  std::vector<double> means(20, 0.0);
  for (std::size_t i = 0; i < e.size(); ++i) means[i / 50] += e[i] / 50.0;
  double mm = 0.0;
  for (double v : means) mm += v / 20.0;
  double ss = 0.0;
  for (double v : means) ss += (v - mm) * (v - mm);
  CHECK(estimate_lp(e, 1.0).std_error == doctest::Approx(std::sqrt(ss / 19.0 / 20.0)).epsilon(1e-10));

  const std::vector<double> one = {0.5};
  CHECK_THROWS_AS(estimate_lp(one, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(estimate_lp(e, 0.5), std::invalid_argument);
  const std::vector<double> two = {1.0, 3.0};
  CHECK(estimate_lp(two, 1.0).mean_error == 2.0);
}

TEST_CASE("rate fit on an exact power law") {
  std::vector<RatePoint> pts;
  for (double n : {16.0, 32.0, 64.0, 128.0, 256.0}) pts.push_back({n, 3.0 * std::pow(n, -0.75)});
  const auto fit = rate_fit(pts);
  CHECK(fit.slope == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.slope_se <= 1e-7);
  CHECK(fit.slope_ci_lo <= 0.75 + 1e-12);
  CHECK(fit.slope_ci_hi >= 0.75 - 1e-12);
  CHECK(fit.dropped == 0);
}

TEST_CASE("rate fit argument errors") {
  const std::vector<RatePoint> two = {{1.0, 1.0}, {2.0, 0.5}};
  CHECK_THROWS_AS(rate_fit(two), std::invalid_argument);
  const std::vector<RatePoint> zero = {{1.0, 1.0}, {2.0, 0.0}, {4.0, 0.25}};
  CHECK_THROWS_AS(rate_fit(zero), std::invalid_argument);
  const std::vector<RatePoint> order = {{1.0, 1.0}, {4.0, 0.5}, {2.0, 0.25}};
  CHECK_THROWS_AS(rate_fit(order), std::invalid_argument);
}

TEST_CASE("confidence band uses the Student t quantile") {
  const std::vector<RatePoint> pts = {{1.0, 1.0}, {2.0, 0.6}, {4.0, 0.3}, {8.0, 0.17}, {16.0, 0.09}, {32.0, 0.051}};
  const auto fit = rate_fit(pts);
  // t quantile at 0.975 with 4 degrees of freedom.
  const double t = 2.7764451051977987;
  CHECK(fit.slope_ci_hi - fit.slope == doctest::Approx(t * fit.slope_se).epsilon(1e-12));
  CHECK(fit.slope - fit.slope_ci_lo == doctest::Approx(t * fit.slope_se).epsilon(1e-12));
}

TEST_CASE("confidence band covers a known slope at about the nominal rate") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> z(0.0, 0.05);
  int covered = 0;
  constexpr int trials = 400;
  for (int k = 0; k < trials; ++k) {
    std::vector<RatePoint> pts;
    for (int j = 3; j <= 9; ++j) {
      const double n = std::ldexp(1.0, j);
      pts.push_back({n, 2.0 * std::pow(n, -0.5) * std::exp(z(gen))});
    }
    const auto fit = rate_fit(pts);
    if (fit.slope_ci_lo <= 0.5 && 0.5 <= fit.slope_ci_hi) ++covered;
  }
  const double rate = static_cast<double>(covered) / trials;
  CHECK(std::fabs(rate - 0.95) <= 3.0 * std::sqrt(0.95 * 0.05 / trials));
}

TEST_CASE("windowed fit drops the smallest n once") {
  const std::vector<RatePoint> kinked = {{4.0, 0.1}, {8.0, 0.5}, {16.0, 0.25}, {32.0, 0.125}};
  const auto fit = rate_fit_windowed(kinked);
  CHECK(fit.dropped == 1);
  CHECK(fit.points.size() == 3);
  CHECK(fit.slope == doctest::Approx(1.0));
  const std::vector<RatePoint> three = {{4.0, 0.1}, {8.0, 0.5}, {16.0, 0.25}};
  CHECK(rate_fit_windowed(three).dropped == 0);
}

TEST_CASE("zero drift: Euler error and coupling gap vanish") {
  auto c = small_config({4, 8, 16}, 50);
  const auto euler_sweep = scheme_error_sweep(DriftModel::zero(), SchemeKind::euler, c);
  for (const auto& e : euler_sweep.estimates) CHECK(e.mean_error <= 1e-13);
  const auto gap = coupling_gap_sweep(DriftModel::zero(), c);
  // W_1 and its coupled copy agree; only the summation order of the
  // increments differs.
  for (const auto& e : gap.estimates) CHECK(e.mean_error <= 1e-15);
  const auto mil = scheme_error_sweep(DriftModel::zero(), SchemeKind::milstein_transformed, c);
  for (const auto& e : mil.estimates) CHECK(e.mean_error <= 1e-10);
  CHECK(mil.range_breaches == 0);
}

TEST_CASE("sweep arguments") {
  const auto mu = DriftModel::weierstrass(0.5);
  auto c = small_config({4, 8}, 1);
  CHECK_THROWS_AS(scheme_error_sweep(mu, SchemeKind::euler, c), std::invalid_argument);
  c.replications = 10;
  c.n_list = {8, 4};
  CHECK_THROWS_AS(scheme_error_sweep(mu, SchemeKind::euler, c), std::invalid_argument);
  c.n_list = {4, 8};
  c.master_ratio = 32;
  CHECK_THROWS_AS(scheme_error_sweep(mu, SchemeKind::euler, c), std::invalid_argument);
  c.master_ratio = 64;
  c.master_n = 64 * 12;
  CHECK_THROWS_AS(scheme_error_sweep(mu, SchemeKind::euler, c), std::invalid_argument);
  c.master_n = 0;
  CHECK_THROWS_AS(scheme_error_sweep(mu, SchemeKind::reference_euler, c), std::invalid_argument);
  c.grid_policy = GridPolicy::user;
  CHECK_THROWS_AS(coupling_gap_sweep(mu, c), std::invalid_argument);
  CHECK(to_string(GridPolicy::user) == "user");
  CHECK(to_string(GridPolicy::uniform_augmented) == "uniform-augmented");
}

TEST_CASE("Euler sweep sanity for mu_alpha") {
  const auto mu = DriftModel::weierstrass(0.5);
  auto c = small_config({16, 32, 64}, 400);
  c.p_list = {1.0, 2.0, 4.0};
  const auto r = scheme_error_sweep(mu, SchemeKind::euler, c);
  CHECK(r.master_n == 64 * 64);
  REQUIRE(r.estimates.size() == 9);
  REQUIRE(r.fits.size() == 3);
  CHECK(r.fit_p == std::vector<double>{1.0, 2.0, 4.0});
  for (double p : c.p_list) {
    const auto& lo = r.at(16, p);
    const auto& hi = r.at(64, p);
    CHECK(hi.mean_error <= lo.mean_error + 2.0 * (lo.std_error + hi.std_error));
  }
  // Power-mean inequality on the same samples.
  for (std::int64_t n : c.n_list) {
    CHECK(r.at(n, 1.0).mean_error <= r.at(n, 2.0).mean_error * (1.0 + 1e-14));
    CHECK(r.at(n, 2.0).mean_error <= r.at(n, 4.0).mean_error * (1.0 + 1e-14));
  }
  CHECK_THROWS_AS(r.at(128, 1.0), std::out_of_range);
}

TEST_CASE("doubling the replications") {
  const auto mu = DriftModel::weierstrass(0.5);
  const auto a = scheme_error_sweep(mu, SchemeKind::euler, small_config({16, 32, 64}, 400, 5));
  const auto b = scheme_error_sweep(mu, SchemeKind::euler, small_config({16, 32, 64}, 800, 5));
  double log_ratio = 0.0;
  for (std::int64_t n : {16, 32, 64}) {
    const auto& x = a.at(n, 1.0);
    const auto& y = b.at(n, 1.0);
    CHECK(std::fabs(x.mean_error - y.mean_error) <= 3.0 * std::hypot(x.std_error, y.std_error));
    log_ratio += std::log(x.std_error / y.std_error) / 3.0;
  }
  // A 20-batch jackknife has relative spread about 1/sqrt(38), so one log
  // ratio has standard deviation about 0.23; the three share their paths.
  CHECK(std::fabs(log_ratio - std::log(std::sqrt(2.0))) <= 3.0 * 0.23);
}

TEST_CASE("coupling gap sweep for mu_alpha") {
  const auto mu = DriftModel::weierstrass(0.5);
  auto c = small_config({4, 8, 16}, 300, 9);
  const auto r = coupling_gap_sweep(mu, c);
  CHECK(r.master_n == 64 * 16);
  for (const auto& e : r.estimates) CHECK(e.mean_error > 0.0);
  CHECK(r.at(16, 1.0).mean_error <= r.at(4, 1.0).mean_error + 2.0 * (r.at(16, 1.0).std_error + r.at(4, 1.0).std_error));

  // User grids with the same contents reproduce the augmented sweep's marginal law.
  auto u = c;
  u.grid_policy = GridPolicy::user;
  u.user_grids = {plain_grid({0.25, 0.5, 0.75}), plain_grid({0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875})};
  u.n_list.clear();
  const auto ur = coupling_gap_sweep(mu, u);
  REQUIRE(ur.estimates.size() == 2);
  CHECK(ur.estimates[0].n == 4);
  CHECK(ur.estimates[1].n == 8);
  CHECK(ur.fits.empty());
}

TEST_CASE("Milstein sweep records the transform and breaches") {
  const auto mu = DriftModel::weierstrass(0.5);
  auto c = small_config({4, 8, 16}, 100);
  const auto r = scheme_error_sweep(mu, SchemeKind::milstein_transformed, c);
  CHECK(r.transform_interp_error > 0.0);
  CHECK(r.transform_interp_error <= 1e-6);
  CHECK(r.range_breaches == 0);
  c.half_width = 0.5;
  const auto tight = scheme_error_sweep(mu, SchemeKind::milstein_transformed, c);
  CHECK(tight.range_breaches > 0);
  CHECK(tight.estimates.front().range_breaches >= tight.range_breaches);
}

TEST_CASE("results do not depend on the thread count") {
  const auto mu = DriftModel::weierstrass(0.5);
  auto one = small_config({8, 16, 32}, 120);
  one.threads = 1;
  auto many = one;
  many.threads = 4;
  const auto a = scheme_error_sweep(mu, SchemeKind::euler, one);
  const auto b = scheme_error_sweep(mu, SchemeKind::euler, many);
  std::ostringstream sa, sb;
  write_sweep_csv(sa, a, {{"k", "v"}}, one.seed);
  write_sweep_csv(sb, b, {{"k", "v"}}, one.seed);
  CHECK(sa.str() == sb.str());
  const auto ga = coupling_gap_sweep(mu, one);
  const auto gb = coupling_gap_sweep(mu, many);
  for (std::size_t i = 0; i < ga.estimates.size(); ++i) CHECK(ga.estimates[i].mean_error == gb.estimates[i].mean_error);
}

TEST_CASE("sweep csv layout") {
  const auto r = scheme_error_sweep(DriftModel::weierstrass(0.5), SchemeKind::euler, small_config({4, 8, 16}, 20));
  std::ostringstream out;
  write_sweep_csv(out, r, {{"alpha", "0.5"}, {"scheme", "euler"}}, 2);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# alpha=0.5");
  std::getline(in, line);
  CHECK(line == "# scheme=euler");
  std::getline(in, line);
  CHECK(line == "n,p,mean_error,std_error,M,breaches,seed");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
    CHECK(line.substr(line.rfind(',') + 1) == "2");
  }
  CHECK(rows == 3);
}
