#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "driftlab/brownian.hpp"
#include "driftlab/schemes.hpp"

using namespace driftlab;

namespace {

std::vector<double> path(std::int64_t n, std::uint64_t rep, std::uint64_t seed = 13) {
  return sample_brownian(n, {seed, rep, roles::brownian, 0});
}

}  // namespace

TEST_CASE("scheme names") {
  CHECK(to_string(SchemeKind::euler) == "euler");
  CHECK(to_string(SchemeKind::milstein_transformed) == "milstein-transformed");
  CHECK(to_string(SchemeKind::reference_euler) == "reference-euler");
}

TEST_CASE("Euler with zero drift telescopes") {
  const auto w = path(256, 0);
  for (std::int64_t n : {1, 4, 16, 256}) {
    const auto run = euler(DriftModel::zero(), 0.7, w, n);
    CHECK(run.endpoint == doctest::Approx(0.7 + w.back()).epsilon(1e-15));
    CHECK(run.steps == n);
    CHECK(run.initial == 0.7);
  }
}

TEST_CASE("Euler with constant drift in one step") {
  const auto w = path(64, 1);
  const auto run = euler(DriftModel::constant(-0.4), 1.0, w, 1);
  CHECK(run.endpoint == 1.0 + -0.4 + w.back());
}

TEST_CASE("Euler trajectory replays the recursion") {
  const auto mu = DriftModel::weierstrass(0.5);
  const auto w = path(512, 2);
  const auto run = euler(mu, 0.25, w, 32, true);
  REQUIRE(run.trajectory.size() == 33);
  CHECK(run.trajectory.front() == 0.25);
  for (std::size_t i = 0; i < 32; ++i) {
    const double next = run.trajectory[i] + mu(run.trajectory[i]) / 32.0 + (w[16 * (i + 1)] - w[16 * i]);
    CHECK(run.trajectory[i + 1] == next);
  }
  CHECK(run.endpoint == run.trajectory.back());
  CHECK(euler(mu, 0.25, w, 32).trajectory.empty());
}

TEST_CASE("divisibility is required") {
  const auto w = path(64, 3);
  CHECK_THROWS_AS(euler(DriftModel::zero(), 0.0, w, 3), std::invalid_argument);
  CHECK_THROWS_AS(euler(DriftModel::zero(), 0.0, w, 0), std::invalid_argument);
  const auto t = build_transform(DriftModel::zero(), {-8.0, 8.0}, {.nodes = 64});
  CHECK_THROWS_AS(milstein_transformed(t, 0.0, w, 5), std::invalid_argument);
}

TEST_CASE("Euler error shrinks with n on a fixed path average") {
  const auto mu = DriftModel::weierstrass(0.5);
  double coarse = 0.0, fine = 0.0;
  for (std::uint64_t r = 0; r < 200; ++r) {
    const auto w = path(16384, r);
    const double ref = reference_solution(mu, 0.0, w, 256).endpoint;
    coarse += std::fabs(euler(mu, 0.0, w, 16).endpoint - ref);
    fine += std::fabs(euler(mu, 0.0, w, 256).endpoint - ref);
  }
  CHECK(fine < coarse);
}

TEST_CASE("Milstein with zero drift follows the noise") {
  const auto t = build_transform(DriftModel::zero(), {-8.0, 8.0}, {.nodes = 64});
  const auto w = path(128, 4);
  const auto run = milstein_transformed(t, 0.3, w, 8, {.store_trajectory = true});
  REQUIRE(run.trajectory.size() == w.size());
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(run.trajectory[k] == doctest::Approx(0.3 + w[k]).epsilon(1e-14));
  CHECK(run.range_breaches == 0);
}

TEST_CASE("Milstein with constant drift matches a hand recursion at n = 2") {
  // For mu = c: G(x) = (1 - e^{-2cx})/(2c), so b(y) = 1 - 2cy and b' = -2c.
  const double c = 0.5;
  const auto t = build_transform(DriftModel::constant(c), {-1.5, 0.9});
  const auto w = path(64, 5);
  const auto run = milstein_transformed(t, 0.1, w, 2, {.store_trajectory = true});
  double y = 0.1;
  for (int l = 0; l < 2; ++l) {
    const double b = 1.0 - 2.0 * c * y, bb = b * -2.0 * c;
    double yt = y;
    for (int k = 1; k <= 32; ++k) {
      const double dw = w[static_cast<std::size_t>(32 * l + k)] - w[static_cast<std::size_t>(32 * l)];
      yt = y + b * dw + 0.5 * bb * (dw * dw - k / 64.0);
      CHECK(std::fabs(run.trajectory[static_cast<std::size_t>(32 * l + k)] - yt) <= 1e-8);
    }
    y = yt;
  }
  CHECK(std::fabs(run.endpoint - y) <= 1e-8);
}

TEST_CASE("dropping the correction gives Euler for the transformed equation") {
  const auto mu = DriftModel::weierstrass(0.5);
  const auto t = build_transform(mu, default_working_interval(0.0));
  const auto w = path(1024, 6);
  const auto run = milstein_transformed(t, 0.0, w, 16, {.drop_correction = true});
  double y = 0.0;
  for (std::size_t l = 0; l < 16; ++l) y = y + t.diffusion_b(y) * (w[64 * (l + 1)] - w[64 * l]);
  CHECK(run.endpoint == y);
}

TEST_CASE("leaving the table flags a range breach") {
  const auto t = build_transform(DriftModel::weierstrass(0.5), {-1.0, 1.0}, {.nodes = 256});
  std::vector<double> ramp(65);
  for (std::size_t k = 0; k < ramp.size(); ++k) ramp[k] = 10.0 * static_cast<double>(k) / 64.0;
  const auto run = milstein_transformed(t, 0.0, ramp, 8);
  CHECK(run.range_breaches == 1);
  CHECK(std::isnan(run.endpoint));
}

TEST_CASE("reference solution") {
  const auto w = path(1024, 7);
  CHECK(reference_solution(DriftModel::zero(), 0.5, w, 16).endpoint == doctest::Approx(0.5 + w.back()).epsilon(1e-15));
  const auto mu = DriftModel::weierstrass(0.5);
  const auto ref = reference_solution(mu, 0.5, w, 16, true);
  const auto direct = euler(mu, 0.5, w, 1024, true);
  CHECK(ref.scheme == SchemeKind::reference_euler);
  CHECK(ref.endpoint == direct.endpoint);
  CHECK(ref.trajectory == direct.trajectory);
  CHECK_THROWS_AS(reference_solution(mu, 0.5, w, 32), std::invalid_argument);
}

TEST_CASE("halving the reference grid moves it far less than the coarse error") {
  const auto mu = DriftModel::weierstrass(0.5);
  double self = 0.0, coarse = 0.0;
  for (std::uint64_t r = 0; r < 200; ++r) {
    const auto w = path(4096, r, 99);
    std::vector<double> half(2049);
    for (std::size_t k = 0; k < half.size(); ++k) half[k] = w[2 * k];
    const double ref = reference_solution(mu, 0.0, w, 16).endpoint;
    self += std::fabs(ref - reference_solution(mu, 0.0, half, 16).endpoint);
    coarse += std::fabs(ref - euler(mu, 0.0, w, 16).endpoint);
  }
  CHECK(coarse >= 4.0 * self);
}

TEST_CASE("schemes read only grid-point values of the coupled path") {
  const auto mu = DriftModel::weierstrass(0.5);
  const auto t = build_transform(mu, default_working_interval(0.0));
  const auto pi = make_augmented_grid(8);
  for (std::uint64_t r = 0; r < 20; ++r) {
    const auto pair = sample_coupled_pair(2048, pi, {3, r, roles::brownian, 0});
    for (std::int64_t n : {1, 2, 8, 32}) {
      CHECK(euler(mu, 0.0, pair.w, n).endpoint == euler(mu, 0.0, pair.w_tilde, n).endpoint);
      CHECK(milstein_transformed(t, 0.0, pair.w, n).endpoint ==
            milstein_transformed(t, 0.0, pair.w_tilde, n).endpoint);
    }
  }
}

TEST_CASE("repeat runs are bitwise identical") {
  const auto mu = DriftModel::weierstrass(0.3);
  const auto t = build_transform(mu, default_working_interval(0.0));
  const auto w = path(2048, 8);
  const auto a = milstein_transformed(t, 0.2, w, 32, {.store_trajectory = true});
  const auto b = milstein_transformed(t, 0.2, w, 32, {.store_trajectory = true});
  CHECK(a.trajectory == b.trajectory);
  CHECK(euler(mu, 0.2, w, 64).endpoint == euler(mu, 0.2, w, 64).endpoint);
}
