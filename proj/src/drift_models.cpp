#include "driftlab/drift_models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "driftlab/dyadic_phase.hpp"
#include "driftlab/rng.hpp"

namespace driftlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSobolevLo = -2.0 * std::numbers::pi;
constexpr double kSobolevHi = 4.0 * std::numbers::pi;

// Neumaier's variant of compensated summation.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double term) noexcept {
    const double next = sum + term;
    if (std::fabs(sum) >= std::fabs(term)) {
      carry += (sum - next) + term;
    } else {
      carry += (term - next) + sum;
    }
    sum = next;
  }
  double value() const noexcept { return sum + carry; }
};

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("drift model: alpha must lie in (0,1)");
  }
}

void check_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("drift model: beta must be positive");
  }
}

std::vector<double> make_series_weights(double alpha, std::optional<double> beta, int terms) {
  std::vector<double> w(static_cast<std::size_t>(terms));
  for (int j = 1; j <= terms; ++j) {
    double a = std::exp2(-alpha * j);
    if (beta) a *= std::pow(static_cast<double>(j), -*beta);
    w[static_cast<std::size_t>(j - 1)] = a;
  }
  return w;
}

std::vector<double> primitive_weights(const std::vector<double>& w) {
  std::vector<double> out(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) out[k] = std::ldexp(w[k], -static_cast<int>(k + 1));
  return out;
}

}  // namespace

std::string to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::weierstrass:
      return "weierstrass";
    case DriftKind::weierstrass_sobolev:
      return "weierstrass-sobolev";
    case DriftKind::constant:
      return "constant";
    case DriftKind::zero:
      return "zero";
    case DriftKind::custom_table:
      return "custom-table";
  }
  return "unknown";
}

int truncation_terms(double alpha, double tail_tol) {
  check_alpha(alpha);
  if (!(tail_tol > 0.0)) throw std::invalid_argument("truncation_terms: tail_tol must be positive");
  const double ratio = 1.0 - std::exp2(-alpha);
  auto tail = [&](int J) { return std::exp2(-alpha * (J + 1)) / ratio; };
  const double estimate = std::log2(1.0 / (tail_tol * ratio)) / alpha - 1.0;
  int J = std::max(1, static_cast<int>(std::floor(estimate)) - 2);
  while (J > 1 && tail(J - 1) <= tail_tol) --J;
  while (tail(J) > tail_tol) ++J;
  if (J > dyadic::kMaxTerms) {
    throw std::invalid_argument("truncation_terms: tail tolerance needs too many terms");
  }
  return J;
}

DriftModel DriftModel::weierstrass(double alpha, double tail_tol) {
  DriftModel m = weierstrass_terms(alpha, truncation_terms(alpha, tail_tol));
  m.tail_tol_ = tail_tol;
  return m;
}

DriftModel DriftModel::weierstrass_sobolev(double alpha, double beta, double tail_tol) {
  DriftModel m = weierstrass_sobolev_terms(alpha, beta, truncation_terms(alpha, tail_tol));
  m.tail_tol_ = tail_tol;
  return m;
}

DriftModel DriftModel::weierstrass_terms(double alpha, int terms) {
  check_alpha(alpha);
  if (terms < 1 || terms > dyadic::kMaxTerms) {
    throw std::invalid_argument("drift model: unsupported number of terms");
  }
  DriftModel m;
  m.kind_ = DriftKind::weierstrass;
  m.alpha_ = alpha;
  m.weights_ = make_series_weights(alpha, std::nullopt, terms);
  m.primitive_weights_ = primitive_weights(m.weights_);
  m.tail_tol_ = m.tail_bound();
  return m;
}

DriftModel DriftModel::weierstrass_sobolev_terms(double alpha, double beta, int terms) {
  check_alpha(alpha);
  check_beta(beta);
  if (terms < 1 || terms > dyadic::kMaxTerms) {
    throw std::invalid_argument("drift model: unsupported number of terms");
  }
  DriftModel m;
  m.kind_ = DriftKind::weierstrass_sobolev;
  m.alpha_ = alpha;
  m.beta_ = beta;
  m.weights_ = make_series_weights(alpha, beta, terms);
  m.primitive_weights_ = primitive_weights(m.weights_);
  m.tail_tol_ = m.tail_bound();
  return m;
}

DriftModel DriftModel::constant(double c) {
  if (!std::isfinite(c)) throw std::invalid_argument("drift model: constant must be finite");
  DriftModel m;
  m.kind_ = DriftKind::constant;
  m.constant_ = c;
  return m;
}

DriftModel DriftModel::zero() { return DriftModel{}; }

DriftModel DriftModel::custom_table(std::vector<double> xs, std::vector<double> ys) {
  if (xs.size() < 2 || xs.size() != ys.size()) {
    throw std::invalid_argument("custom drift: need at least two (x, y) samples of equal count");
  }
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (!std::isfinite(xs[k]) || !std::isfinite(ys[k])) {
      throw std::invalid_argument("custom drift: samples must be finite");
    }
    if (k > 0 && !(xs[k] > xs[k - 1])) {
      throw std::invalid_argument("custom drift: abscissae must be strictly increasing");
    }
  }
  auto table = std::make_shared<Table>();
  table->xs = std::move(xs);
  table->ys = std::move(ys);
  table->cumulative.assign(table->xs.size(), 0.0);
  for (std::size_t k = 1; k < table->xs.size(); ++k) {
    table->cumulative[k] = table->cumulative[k - 1] +
                           0.5 * (table->xs[k] - table->xs[k - 1]) * (table->ys[k] + table->ys[k - 1]);
  }
  DriftModel m;
  m.kind_ = DriftKind::custom_table;
  m.table_ = table;
  auto t = std::make_shared<Table>(*table);
  t->primitive_at_zero = m.table_sample(0.0, false, true).primitive;
  m.table_ = std::move(t);
  return m;
}

std::optional<double> DriftModel::beta() const noexcept {
  if (kind_ == DriftKind::weierstrass_sobolev) return beta_;
  return std::nullopt;
}

double DriftModel::tail_bound() const noexcept {
  if (weights_.empty()) return 0.0;
  return std::exp2(-alpha_ * (terms() + 1)) / (1.0 - std::exp2(-alpha_));
}

double DriftModel::series(double x) const {
  return dyadic::weighted_sums(x, weights_, {}).sin_sum;
}

DriftSample DriftModel::series_with_primitive(double x) const {
  const auto sums = dyadic::weighted_sums(x, weights_, primitive_weights_);
  return {sums.sin_sum, sums.versine_sum};
}

DriftSample DriftModel::table_sample(double x, bool want_value, bool want_primitive) const {
  const Table& t = *table_;
  DriftSample out;
  const double lo = t.xs.front();
  const double hi = t.xs.back();
  const double xc = std::clamp(x, lo, hi);
  auto it = std::upper_bound(t.xs.begin(), t.xs.end(), xc);
  std::size_t k = static_cast<std::size_t>(std::distance(t.xs.begin(), it));
  k = std::clamp<std::size_t>(k, 1, t.xs.size() - 1);
  const double x0 = t.xs[k - 1];
  const double x1 = t.xs[k];
  const double w = (xc - x0) / (x1 - x0);
  const double yc = t.ys[k - 1] + w * (t.ys[k] - t.ys[k - 1]);
  if (want_value) out.value = (x < lo || x > hi) ? 0.0 : yc;
  if (want_primitive) {
    const double partial = 0.5 * (xc - x0) * (t.ys[k - 1] + yc);
    out.primitive = t.cumulative[k - 1] + partial - t.primitive_at_zero;
  }
  return out;
}

double DriftModel::operator()(double x) const {
  switch (kind_) {
    case DriftKind::weierstrass:
      return series(x);
    case DriftKind::weierstrass_sobolev:
      if (x < kSobolevLo || x > kSobolevHi) return 0.0;
      return series(x);
    case DriftKind::constant:
      return constant_;
    case DriftKind::zero:
      return 0.0;
    case DriftKind::custom_table:
      return table_sample(x, true, false).value;
  }
  return 0.0;
}

double DriftModel::primitive(double x) const { return sample(x).primitive; }

DriftSample DriftModel::sample(double x) const {
  switch (kind_) {
    case DriftKind::weierstrass:
      return series_with_primitive(x);
    case DriftKind::weierstrass_sobolev: {
      const double xc = std::clamp(x, kSobolevLo, kSobolevHi);
      DriftSample s = series_with_primitive(xc);
      if (xc != x) s.value = 0.0;
      return s;
    }
    case DriftKind::constant:
      return {constant_, constant_ * x};
    case DriftKind::zero:
      return {};
    case DriftKind::custom_table:
      return table_sample(x, true, true);
  }
  return {};
}

double DriftModel::sup_bound() const noexcept {
  switch (kind_) {
    case DriftKind::weierstrass:
    case DriftKind::weierstrass_sobolev: {
      CompensatedSum acc;
      for (double w : weights_) acc.add(w);
      return acc.value();
    }
    case DriftKind::constant:
      return std::fabs(constant_);
    case DriftKind::zero:
      return 0.0;
    case DriftKind::custom_table: {
      double m = 0.0;
      for (double y : table_->ys) m = std::max(m, std::fabs(y));
      return m;
    }
  }
  return 0.0;
}

std::optional<Interval> DriftModel::support() const noexcept {
  if (kind_ == DriftKind::weierstrass_sobolev) return Interval{kSobolevLo, kSobolevHi};
  if (kind_ == DriftKind::custom_table) return Interval{table_->xs.front(), table_->xs.back()};
  return std::nullopt;
}

std::string DriftModel::describe() const {
  std::ostringstream os;
  os << to_string(kind_);
  switch (kind_) {
    case DriftKind::weierstrass:
      os << "(alpha=" << alpha_ << ", J=" << terms() << ")";
      break;
    case DriftKind::weierstrass_sobolev:
      os << "(alpha=" << alpha_ << ", beta=" << beta_ << ", J=" << terms() << ")";
      break;
    case DriftKind::constant:
      os << "(c=" << constant_ << ")";
      break;
    case DriftKind::custom_table:
      os << "(samples=" << table_->xs.size() << ")";
      break;
    case DriftKind::zero:
      break;
  }
  return os.str();
}

double eval_drift(const DriftModel& model, double x) {
  if (!std::isfinite(x)) throw std::domain_error("eval_drift: non-finite argument");
  return model(x);
}

std::complex<double> FourierSpectrum::at(std::int64_t k) const {
  auto it = entries.find(k);
  return it == entries.end() ? std::complex<double>{} : it->second;
}

FourierSpectrum fourier_spectrum(const DriftModel& model, std::int64_t max_frequency) {
  if (max_frequency < 1) throw std::invalid_argument("fourier_spectrum: K must be >= 1");
  FourierSpectrum spec;
  spec.max_frequency = max_frequency;
  // sin(m x) = (e^{imx} - e^{-imx}) / (2i) gives f_{+-m} = -+ i sqrt(pi/2) a.
  const double scale = std::sqrt(std::numbers::pi / 2.0);
  switch (model.kind()) {
    case DriftKind::weierstrass:
    case DriftKind::weierstrass_sobolev: {
      const auto& w = model.series_weights();
      for (std::size_t k = 0; k < w.size() && k < 62; ++k) {
        const std::int64_t freq = std::int64_t{1} << (k + 1);
        if (freq > max_frequency) break;
        spec.entries[freq] = {0.0, -scale * w[k]};
        spec.entries[-freq] = {0.0, scale * w[k]};
      }
      break;
    }
    case DriftKind::constant:
      if (model.constant_value() != 0.0) {
        spec.entries[0] = {std::sqrt(kTwoPi) * model.constant_value(), 0.0};
      }
      break;
    case DriftKind::zero:
      break;
    case DriftKind::custom_table: {
      constexpr std::int64_t kMaxNumeric = 4096;
      if (max_frequency > kMaxNumeric) {
        throw std::invalid_argument("fourier_spectrum: numeric spectra are limited to K <= 4096");
      }
      const std::int64_t n = 8 * kMaxNumeric;
      std::vector<double> f(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) f[static_cast<std::size_t>(i)] = model(kTwoPi * i / n);
      const double weight = std::sqrt(kTwoPi) / static_cast<double>(n);
      for (std::int64_t k = -max_frequency; k <= max_frequency; ++k) {
        double re = 0.0;
        double im = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
          const double angle = -kTwoPi * static_cast<double>((k * i) % n) / static_cast<double>(n);
          re += f[static_cast<std::size_t>(i)] * std::cos(angle);
          im += f[static_cast<std::size_t>(i)] * std::sin(angle);
        }
        if (re != 0.0 || im != 0.0) spec.entries[k] = {weight * re, weight * im};
      }
      break;
    }
  }
  return spec;
}

double holder_seminorm_probe(const RealFunction& f, double alpha, Interval domain,
                             std::int64_t samples, std::uint64_t seed) {
  if (!(domain.hi > domain.lo) || !std::isfinite(domain.lo) || !std::isfinite(domain.hi)) {
    throw std::invalid_argument("holder_seminorm_probe: empty domain");
  }
  if (samples < 2) throw std::invalid_argument("holder_seminorm_probe: need at least 2 samples");
  const CounterStream random_pairs(StreamKey{seed, 0, 0x484f4c44u, 0});
  const CounterStream near_pairs(StreamKey{seed, 0, 0x484f4c44u, 1});
  const double width = domain.width();
  double best = 0.0;
  auto consider = [&](double x, double y) {
    if (x == y) return;
    const double ratio = std::fabs(f(x) - f(y)) / std::pow(std::fabs(x - y), alpha);
    if (std::isfinite(ratio)) best = std::max(best, ratio);
  };
  for (std::int64_t k = 0; k < samples; ++k) {
    const auto u = random_pairs.uniforms(static_cast<std::uint64_t>(k));
    consider(domain.lo + width * u[0], domain.lo + width * u[1]);
    const auto v = near_pairs.uniforms(static_cast<std::uint64_t>(k));
    const int level = static_cast<int>(std::floor(std::log2(static_cast<double>(k + 1))));
    const double h = std::ldexp(width, -level) * (0.5 + 0.5 * v[0]);
    const double x = domain.lo + (width - h) * v[1];
    consider(x, x + h);
  }
  return best;
}

double gagliardo_seminorm(const RealFunction& f, double alpha, double p, Interval support,
                          int grid_n) {
  if (grid_n < 8) throw std::invalid_argument("gagliardo_seminorm: grid_n must be >= 8");
  if (!(p >= 1.0)) throw std::invalid_argument("gagliardo_seminorm: p must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("gagliardo_seminorm: alpha must lie in (0,1)");
  }
  if (!(support.hi > support.lo)) throw std::invalid_argument("gagliardo_seminorm: empty support");
  const double w = support.width();
  const Interval box{support.lo - w, support.hi + w};
  const double h = box.width() / grid_n;
  const double exponent = 1.0 + alpha * p;
  std::vector<double> values(static_cast<std::size_t>(grid_n));
  std::vector<double> mids(static_cast<std::size_t>(grid_n));
  for (int i = 0; i < grid_n; ++i) {
    mids[static_cast<std::size_t>(i)] = box.lo + (i + 0.5) * h;
    values[static_cast<std::size_t>(i)] = f(mids[static_cast<std::size_t>(i)]);
  }
  std::vector<double> kernel(static_cast<std::size_t>(grid_n));
  for (int d = 1; d < grid_n; ++d) kernel[static_cast<std::size_t>(d)] = h * h / std::pow(d * h, exponent);

  auto power = [p](double a) { return p == 2.0 ? a * a : std::pow(a, p); };
  CompensatedSum total;
  for (int i = 0; i < grid_n; ++i) {
    CompensatedSum row;
    for (int j = i + 1; j < grid_n; ++j) {
      const double diff = std::fabs(values[static_cast<std::size_t>(i)] - values[static_cast<std::size_t>(j)]);
      if (diff != 0.0) row.add(power(diff) * kernel[static_cast<std::size_t>(j - i)]);
    }
    total.add(2.0 * row.value());
  }
  // One point inside the box, the other outside, where f vanishes.
  const double ap = alpha * p;
  for (int i = 0; i < grid_n; ++i) {
    const double fi = values[static_cast<std::size_t>(i)];
    if (fi == 0.0) continue;
    const double z = mids[static_cast<std::size_t>(i)];
    const double tail = (std::pow(z - box.lo, -ap) + std::pow(box.hi - z, -ap)) / ap;
    total.add(2.0 * h * power(std::fabs(fi)) * tail);
  }
  return total.value();
}

}  // namespace driftlab
