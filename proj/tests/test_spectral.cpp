#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "driftlab/spectral.hpp"

using namespace driftlab;

namespace {

struct Golden {
  double x;
  double a;
};

// 30-digit adaptive quadrature of the double integral.
const Golden kGolden[] = {
    {4.0, 0.08936339020353256522761768},
    {16.0, 0.0869039147837114294944},
    {64.0, 0.0292262256087281399523},
    {100.0, 0.0191825352254933546993},
    {1000.0, 0.00199198387043892034225},
    {1e4, 1.99919983987184615375e-4},
};

}  // namespace

TEST_CASE("Gauss-Legendre rules integrate polynomials exactly") {
  for (int n : {2, 5, 16, 64}) {
    const auto& r = gauss_legendre(n);
    REQUIRE(r.nodes.size() == static_cast<std::size_t>(n));
    double w = 0.0;
    for (double v : r.weights) w += v;
    CHECK(w == doctest::Approx(2.0).epsilon(1e-14));
    for (int deg = 0; deg < 2 * n; deg += 2) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += r.weights[static_cast<std::size_t>(i)] * std::pow(r.nodes[static_cast<std::size_t>(i)], deg);
      CHECK(s == doctest::Approx(2.0 / (deg + 1)).epsilon(1e-13));
    }
  }
  CHECK(&gauss_legendre(16) == &gauss_legendre(16));
  CHECK_THROWS_AS(gauss_legendre(0), std::invalid_argument);
}

TEST_CASE("A at zero and its bounds") {
  CHECK(a_function(0.0) == 0.0);
  for (double x : {1e-6, 0.01, 0.3, 1.0, 7.0, 40.0, 64.0, 65.0, 300.0, 5e3, 1e6, 1e9, 1e12}) {
    const double a = a_function(x);
    CAPTURE(x);
    CHECK(a >= 0.0);
    CHECK(a <= 0.5);
  }
  CHECK_THROWS_AS(a_function(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(a_function(std::nan("")), std::invalid_argument);
}

TEST_CASE("A against high-precision values") {
  for (const auto& g : kGolden) {
    CAPTURE(g.x);
    CHECK(std::fabs(a_function(g.x) - g.a) <= 1e-10 * g.a);
    const auto c = a_function_checked(g.x);
    CHECK(c.value == a_function(g.x));
    CHECK(c.error_estimate <= 1e-8 * g.a);
  }
}

TEST_CASE("small-x expansion") {
  // A(x) = x/24 + O(x^2) from the first-order expansion of the integrand.
  for (double x : {1e-4, 1e-3}) CHECK(a_function(x) == doctest::Approx(x / 24.0).epsilon(10.0 * x));
}

TEST_CASE("large-x regime agrees across the switch") {
  CHECK(a_function(1e8) == doctest::Approx(2.0 / 1e8 - 8.0 / 1e16).epsilon(1e-12));
  CHECK(a_function(9.9e7) == doctest::Approx(2.0 / 9.9e7 - 8.0 / (9.9e7 * 9.9e7)).epsilon(1e-7));
  CHECK(a_function(64.0) == doctest::Approx(a_function(64.0 + 1e-9)).epsilon(1e-9));
}

TEST_CASE("A is stable under the quadrature order") {
  for (double x : {0.5, 4.0, 30.0}) CHECK(a_function(x, 48) == doctest::Approx(a_function(x, 96)).epsilon(1e-12));
}

TEST_CASE("dominant level") {
  CHECK(dominant_level(1.0) == 0);
  CHECK(dominant_level(0.25) == 1);
  CHECK(dominant_level(0.2) == 2);
  CHECK(dominant_level(std::ldexp(1.0, -12)) == 6);
  CHECK(dominant_level(std::ldexp(1.0, -11)) == 6);
  for (int k = 0; k <= 40; ++k) {
    const double d = std::ldexp(1.0, -k) * (k % 3 == 0 ? 1.0 : 0.77);
    const double f = std::ldexp(1.0, 2 * dominant_level(d));
    CHECK(f >= 1.0 / d);
    CHECK(f <= 4.0 / d);
  }
}

TEST_CASE("spectral functional") {
  const auto mu = DriftModel::weierstrass(0.5);
  const auto spec = fourier_spectrum(mu, 1 << 20);
  CHECK(spectral_lower_value(FourierSpectrum{}, 0.1).value == 0.0);
  CHECK_THROWS_AS(spectral_lower_value(spec, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(spectral_lower_value(spec, 1.5), std::invalid_argument);

  for (double d : {0.5, 0.1, 0.01, 0.001}) {
    const auto b = spectral_lower_value(spec, d);
    CHECK(b.value >= b.dominant_term);
    CHECK(b.dominant_term > 0.0);
    CHECK(b.j_star == dominant_level(d));
    // Direct sum over the frequencies +-2^j with |f|^2 = (pi/2) 2^{-2 alpha j}.
    double direct = 0.0;
    for (int j = 1; j <= 20; ++j) {
      const double k = std::ldexp(1.0, j);
      direct += 2.0 * (std::numbers::pi / 2.0) * std::pow(2.0, -1.0 * j) * a_function(d * k * k);
    }
    CHECK(b.value == doctest::Approx(direct * d * d).epsilon(1e-10));
  }
}

TEST_CASE("one-frequency spectrum: linear in |f|^2 with a delta^2 prefactor") {
  FourierSpectrum one;
  one.entries[4] = {0.0, 0.3};
  FourierSpectrum twice;
  twice.entries[4] = {0.0, 0.3 * std::sqrt(2.0)};
  for (double d : {0.5, 0.05}) {
    const double v = spectral_lower_value(one, d).value;
    CHECK(v == doctest::Approx(d * d * 0.09 * a_function(16.0 * d)).epsilon(1e-14));
    CHECK(spectral_lower_value(twice, d).value == doctest::Approx(2.0 * v).epsilon(1e-14));
  }
}

TEST_CASE("value scales like delta^{2 + alpha} for mu_alpha") {
  const auto spec = fourier_spectrum(DriftModel::weierstrass(0.5), 1 << 20);
  double lo = INFINITY, hi = 0.0;
  for (int k = 4; k <= 12; ++k) {
    const double d = std::ldexp(1.0, -k);
    const double r = spectral_lower_value(spec, d).value / std::pow(d, 2.5);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(lo > 0.0);
  CHECK(hi / lo <= 1.25);
}

TEST_CASE("Monte-Carlo identity: trivial frequencies") {
  const auto mu = DriftModel::weierstrass(0.5);
  const GhatOptions opt{.replications = 200, .seed = 4, .substeps = 64, .threads = 2};
  const auto zero = ghat_identity_mc(mu, 0, 0.5, 0.6, opt);
  CHECK(zero.mc_estimate == 0.0);
  CHECK(zero.closed_form == 0.0);
  CHECK(zero.z_score == 0.0);
  const auto three = ghat_identity_mc(mu, 3, 0.5, 0.6, opt);
  CHECK(three.coefficient_sq == 0.0);
  CHECK(three.mc_estimate == 0.0);
  CHECK(three.closed_form == 0.0);
  CHECK(three.kernel_closed > 0.0);
  CHECK(std::fabs(three.z_score) <= 4.0);
}

TEST_CASE("Monte-Carlo identity at j = 2 on [0.5, 0.6]") {
  const auto mu = DriftModel::weierstrass(0.5);
  const auto r = ghat_identity_mc(mu, 2, 0.5, 0.6, {.replications = 10000, .seed = 11, .substeps = 1024, .threads = 0});
  CHECK(r.j == 2);
  CHECK(r.delta == doctest::Approx(0.1));
  CHECK(r.coefficient_sq == doctest::Approx(std::numbers::pi / 2.0 * 0.5).epsilon(1e-14));
  CHECK(r.closed_form == doctest::Approx(4.0 * r.coefficient_sq * r.delta * r.delta * a_function(4.0 * r.delta)).epsilon(1e-12));
  CHECK(std::fabs(r.z_score) <= 3.0);
  CHECK(r.replications == 10000);
}

TEST_CASE("Monte-Carlo identity arguments") {
  const auto mu = DriftModel::weierstrass(0.5);
  CHECK_THROWS_AS(ghat_identity_mc(mu, 2, 0.5, 0.6, {.replications = 99}), std::invalid_argument);
  CHECK_THROWS_AS(ghat_identity_mc(mu, 2, 0.6, 0.5, {}), std::invalid_argument);
  CHECK_THROWS_AS(ghat_identity_mc(mu, 2, 0.5, 1.2, {}), std::invalid_argument);
  CHECK_THROWS_AS(ghat_identity_mc(mu, 2, -0.1, 0.5, {}), std::invalid_argument);
}

TEST_CASE("trapezoid bias of the kernel is second order") {
  const double d = 0.1;
  const double exact = 4.0 * d * d * a_function(4.0 * d);
  const double b512 = std::fabs(discrete_kernel_expectation(2, d, 512) - exact);
  const double b1024 = std::fabs(discrete_kernel_expectation(2, d, 1024) - exact);
  CHECK(b512 / b1024 == doctest::Approx(4.0).epsilon(0.05));
  CHECK(b1024 <= 1e-6 * exact);
}

TEST_CASE("Monte-Carlo identity is independent of the thread count") {
  const auto mu = DriftModel::weierstrass(0.5);
  GhatOptions a{.replications = 300, .seed = 6, .substeps = 128, .threads = 1};
  GhatOptions b = a;
  b.threads = 3;
  const auto x = ghat_identity_mc(mu, 4, 0.2, 0.3, a);
  const auto y = ghat_identity_mc(mu, 4, 0.2, 0.3, b);
  CHECK(x.mc_estimate == y.mc_estimate);
  CHECK(x.std_error == y.std_error);
  b.stream_family = 1;
  CHECK(ghat_identity_mc(mu, 4, 0.2, 0.3, b).mc_estimate != x.mc_estimate);

  std::ostringstream out;
  write_ghat_csv(out, {x, y}, {{"drift", "weierstrass"}});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# drift=weierstrass");
  std::getline(in, line);
  CHECK(line == "j,delta,mc_estimate,closed_form,std_error,z_score");
}
