#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace driftlab {

inline constexpr double kDefaultTailTol = 1e-12;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const noexcept { return hi - lo; }
  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
};

enum class DriftKind { weierstrass, weierstrass_sobolev, constant, zero, custom_table };

std::string to_string(DriftKind kind);

/// Drift value together with its primitive T(x) = int_0^x mu(z) dz.
struct DriftSample {
  double value = 0.0;
  double primitive = 0.0;
};

/// A scalar drift coefficient mu.
///
/// The Weierstrass families are
///   mu_alpha(x)        = sum_j 2^{-alpha j} sin(2^j x),
///   mu_{alpha,beta}(x) = 1_{[-2pi,4pi]}(x) sum_j j^{-beta} 2^{-alpha j} sin(2^j x),
/// truncated after J terms, where J is the smallest integer whose geometric
/// tail bound sum_{j>J} 2^{-alpha j} does not exceed the requested tolerance.
/// Every term is evaluated with an exactly reduced phase, so the truncated
/// series is evaluated at x itself and not at a nearby point.
///
/// Models are immutable values; evaluation is pure and thread-safe.
class DriftModel {
 public:
  static DriftModel weierstrass(double alpha, double tail_tol = kDefaultTailTol);
  static DriftModel weierstrass_sobolev(double alpha, double beta,
                                        double tail_tol = kDefaultTailTol);
  /// Fixed truncation level, bypassing the tail-tolerance rule.
  static DriftModel weierstrass_terms(double alpha, int terms);
  static DriftModel weierstrass_sobolev_terms(double alpha, double beta, int terms);
  static DriftModel constant(double c);
  static DriftModel zero();
  /// Piecewise-linear interpolation of (xs, ys); zero outside [xs.front(), xs.back()].
  static DriftModel custom_table(std::vector<double> xs, std::vector<double> ys);

  DriftKind kind() const noexcept { return kind_; }
  double alpha() const noexcept { return alpha_; }
  std::optional<double> beta() const noexcept;
  int terms() const noexcept { return static_cast<int>(weights_.size()); }
  double tail_tol() const noexcept { return tail_tol_; }
  double constant_value() const noexcept { return constant_; }

  /// Geometric bound on the discarded tail, sum_{j>J} 2^{-alpha j}.
  double tail_bound() const noexcept;

  double operator()(double x) const;
  /// T(x) = int_0^x mu(z) dz, in closed form for every kind.
  double primitive(double x) const;
  DriftSample sample(double x) const;

  /// Upper bound on sup |mu| for the evaluated (truncated) function.
  double sup_bound() const noexcept;

  /// Support of mu when it is compact.
  std::optional<Interval> support() const noexcept;

  /// Coefficients of sin(2^j x), j = 1..J (empty for non-series kinds).
  const std::vector<double>& series_weights() const noexcept { return weights_; }

  std::string describe() const;

 private:
  DriftModel() = default;
  double series(double x) const;
  DriftSample series_with_primitive(double x) const;
  DriftSample table_sample(double x, bool want_value, bool want_primitive) const;

  DriftKind kind_ = DriftKind::zero;
  double alpha_ = 0.0;
  double beta_ = 0.0;
  double tail_tol_ = 0.0;
  double constant_ = 0.0;
  std::vector<double> weights_;
  std::vector<double> primitive_weights_;  // weights_[j-1] / 2^j
  struct Table {
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<double> cumulative;  // int_{xs[0]}^{xs[k]} mu
    double primitive_at_zero = 0.0;
  };
  std::shared_ptr<const Table> table_;
};

/// Smallest J with 2^{-alpha (J+1)} / (1 - 2^{-alpha}) <= tail_tol.
int truncation_terms(double alpha, double tail_tol);

/// Evaluates mu at x; throws std::domain_error for non-finite x.
double eval_drift(const DriftModel& model, double x);

/// Fourier coefficients f_k = (2 pi)^{-1/2} int_0^{2 pi} f(x) e^{-ikx} dx.
/// Only nonzero coefficients are stored.
struct FourierSpectrum {
  std::map<std::int64_t, std::complex<double>> entries;
  std::int64_t max_frequency = 0;

  std::complex<double> at(std::int64_t k) const;
};

/// Spectrum at |k| <= K. The Weierstrass kinds use their exponential
/// representation (for mu_{alpha,beta} this is the spectrum of the periodic
/// series, not of the truncated-support function). Throws
/// std::invalid_argument for K < 1.
FourierSpectrum fourier_spectrum(const DriftModel& model, std::int64_t max_frequency);

using RealFunction = std::function<double(double)>;

/// Lower estimate of sup |f(x)-f(y)| / |x-y|^alpha over `domain`.
///
/// Pair k is a function of (seed, k) only: a uniformly random pair plus a
/// pair at distance ~ width * 2^{-floor(log2(k+1))}. Increasing `samples`
/// only adds pairs, so the estimate is nondecreasing in `samples`.
double holder_seminorm_probe(const RealFunction& f, double alpha, Interval domain,
                             std::int64_t samples, std::uint64_t seed);

/// Midpoint-rule estimate of the Gagliardo double integral
///   int int |f(x)-f(y)|^p / |x-y|^{1+alpha p} dx dy
/// for f supported in `support`.
///
/// The grid covers the support enlarged by its width on both sides with
/// `grid_n` cells per axis; diagonal cells are excluded and the region where
/// one variable leaves the enlarged support is added in closed form.
/// Throws std::invalid_argument for grid_n < 8 or p < 1.
double gagliardo_seminorm(const RealFunction& f, double alpha, double p, Interval support,
                          int grid_n = 512);

}  // namespace driftlab
