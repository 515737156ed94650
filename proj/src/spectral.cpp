#include "driftlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "driftlab/brownian.hpp"
#include "driftlab/parallel.hpp"
#include "driftlab/rng.hpp"

namespace driftlab {

namespace {

GaussRule compute_rule(int order) {
  GaussRule rule;
  const auto n = static_cast<std::size_t>(order);
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev-like initial guess for the i-th largest root.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::fabs(step) <= 1e-16) break;
    }
    // Recompute the derivative at the converged root.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= order; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = order * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (order % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

// phi(z) = (1 - e^{-z}) / z, continuous at 0.
double phi(double z) { return z == 0.0 ? 1.0 : -std::expm1(-z) / z; }

double a_tensor(double x, int order) {
  const GaussRule& g = gauss_legendre(order);
  double total = 0.0;
  for (std::size_t a = 0; a < g.nodes.size(); ++a) {
    const double t = 0.5 * (g.nodes[a] + 1.0);
    const double span = 1.0 - t;
    double inner = 0.0;
    for (std::size_t b = 0; b < g.nodes.size(); ++b) {
      const double v = 0.5 * (g.nodes[b] + 1.0);
      const double u = t + span * v;
      inner += g.weights[b] * std::exp(-x * (u - t) / 2.0) * -std::expm1(-x * t * (1.0 - u));
    }
    total += g.weights[a] * 0.5 * span * inner;
  }
  return 0.5 * total;
}

// A = I1 - int_0^1 g(t) dt after integrating over u in closed form.
double a_reduced(double x, int order) {
  const double i1 = (2.0 / x) * (1.0 + (2.0 / x) * std::expm1(-x / 2.0));
  auto g = [x](double t) {
    const double s = 1.0 - t;
    if (t <= 0.5) return s * std::exp(-x * t * s) * phi(x * (0.5 - t) * s);
    return s * std::exp(-x * s / 2.0) * phi(x * (t - 0.5) * s);
  };
  std::vector<double> cuts{0.0};
  for (double b = 1.0 / x; b < 0.5; b *= 2.0) cuts.push_back(b);
  const std::size_t left = cuts.size();
  cuts.push_back(0.5);
  for (std::size_t k = left; k-- > 1;) cuts.push_back(1.0 - cuts[k]);
  cuts.push_back(1.0);

  const GaussRule& rule = gauss_legendre(order);
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k];
    const double b = cuts[k + 1];
    double panel = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      panel += rule.weights[q] * g(a + 0.5 * (b - a) * (rule.nodes[q] + 1.0));
    }
    integral += 0.5 * (b - a) * panel;
  }
  return i1 - integral;
}

}  // namespace

const GaussRule& gauss_legendre(int order) {
  if (order < 1 || order > 4096) throw std::invalid_argument("gauss_legendre: order out of range");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<GaussRule>(compute_rule(order));
  return *slot;
}

double a_function(double x, int order) {
  if (!(x >= 0.0)) throw std::invalid_argument("a_function: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 0.0;
  if (x >= 1e8) return 2.0 / x - 8.0 / (x * x);
  if (x <= 64.0) return a_tensor(x, order);
  return a_reduced(x, order);
}

CheckedValue a_function_checked(double x, int order) {
  const double v = a_function(x, order);
  return {v, std::fabs(v - a_function(x, 2 * order))};
}

int dominant_level(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("dominant_level: need 0 < delta <= 1");
  const double v = -0.5 * std::log2(delta);
  const double r = std::nearbyint(v);
  return static_cast<int>(std::fabs(v - r) <= 1e-12 ? r : std::ceil(v));
}

SpectralBound spectral_lower_value(const FourierSpectrum& spectrum, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("spectral_lower_value: need 0 < delta <= 1");
  }
  SpectralBound out;
  out.delta = delta;
  out.j_star = dominant_level(delta);
  const double dominant_k = std::ldexp(1.0, out.j_star);
  double sum = 0.0;
  double dom = 0.0;
  for (const auto& [k, c] : spectrum.entries) {
    const double kk = static_cast<double>(k);
    const double term = std::norm(c) * a_function(delta * kk * kk);
    sum += term;
    if (std::fabs(kk) == dominant_k) dom += term;
  }
  out.value = delta * delta * sum;
  out.dominant_term = delta * delta * dom;
  return out;
}

GhatResult ghat_identity_mc(const DriftModel& model, std::int64_t j, double t_lo, double t_hi,
                            const GhatOptions& options) {
  if (options.replications < 100) throw std::invalid_argument("ghat_identity_mc: need M >= 100");
  if (!(t_lo >= 0.0 && t_lo < t_hi && t_hi <= 1.0)) {
    throw std::invalid_argument("ghat_identity_mc: need 0 <= t_lo < t_hi <= 1");
  }
  if (options.substeps < 2) throw std::invalid_argument("ghat_identity_mc: need at least 2 substeps");
  const double delta = t_hi - t_lo;
  const auto s = options.substeps;
  const double h = delta / static_cast<double>(s);
  const double jd = static_cast<double>(j);

  GhatResult res;
  res.j = j;
  res.delta = delta;
  res.replications = options.replications;
  if (j != 0) {
    res.coefficient_sq = std::norm(fourier_spectrum(model, j < 0 ? -j : j).at(j));
  }
  res.kernel_closed = 4.0 * delta * delta * a_function(delta * jd * jd);

  std::vector<double> kernel(static_cast<std::size_t>(options.replications), 0.0);
  if (j != 0) {
    const std::vector<std::int64_t> knots{0, s};
    parallel_for(options.replications, options.threads, [&](std::int64_t r) {
      const StreamKey key{options.seed, static_cast<std::uint32_t>(r), roles::brownian,
                          options.stream_family};
      const auto w = sample_brownian(s, key, delta);
      auto wt = w;
      couple_bridges(wt, knots, {options.seed, static_cast<std::uint32_t>(r), roles::bridge_base, options.stream_family},
                     delta);
      double re = 0.0;
      double im = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double weight = (k == 0 || k + 1 == w.size()) ? 0.5 * h : h;
        re += weight * (std::cos(jd * w[k]) - std::cos(jd * wt[k]));
        im -= weight * (std::sin(jd * w[k]) - std::sin(jd * wt[k]));
      }
      kernel[static_cast<std::size_t>(r)] = re * re + im * im;
    });
  }

  const auto m = static_cast<double>(options.replications);
  double mean = 0.0;
  for (double v : kernel) mean += v;
  mean /= m;
  double ss = 0.0;
  for (double v : kernel) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / (m - 1.0) / m);

  res.kernel_mc = mean;
  res.kernel_std_error = se;
  res.z_score = se > 0.0 ? (mean - res.kernel_closed) / se : 0.0;
  res.mc_estimate = res.coefficient_sq * mean;
  res.closed_form = res.coefficient_sq * res.kernel_closed;
  res.std_error = res.coefficient_sq * se;
  return res;
}

double discrete_kernel_expectation(std::int64_t j, double delta, std::int64_t substeps) {
  if (substeps < 2 || !(delta > 0.0)) {
    throw std::invalid_argument("discrete_kernel_expectation: bad arguments");
  }
  const double h = delta / static_cast<double>(substeps);
  const double j2 = static_cast<double>(j) * static_cast<double>(j);
  const auto n = static_cast<std::size_t>(substeps) + 1;
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const double wa = (a == 0 || a + 1 == n) ? 0.5 * h : h;
    const double ta = static_cast<double>(a) * h;
    for (std::size_t b = a; b < n; ++b) {
      const double wb = (b == 0 || b + 1 == n) ? 0.5 * h : h;
      const double tb = static_cast<double>(b) * h;
      const double same = std::exp(-j2 * (tb - ta) / 2.0);
      const double cross = same * std::exp(-j2 * ta * (delta - tb) / delta);
      const double term = 2.0 * wa * wb * (same - cross);
      total += (a == b) ? term : 2.0 * term;
    }
  }
  return total;
}

void write_ghat_csv(std::ostream& out, const std::vector<GhatResult>& rows, const Metadata& metadata) {
  write_metadata(out, metadata);
  out << "j,delta,mc_estimate,closed_form,std_error,z_score\n";
  for (const auto& r : rows) {
    out << r.j << ',' << format_number(r.delta) << ',' << format_number(r.mc_estimate) << ','
        << format_number(r.closed_form) << ',' << format_number(r.std_error) << ','
        << format_number(r.z_score) << '\n';
  }
}

}  // namespace driftlab
