#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "driftlab/csv.hpp"
#include "driftlab/drift_models.hpp"

namespace driftlab {

/// Gauss-Legendre rule on [-1, 1]. Rules are computed once per order
/// (Newton iteration on P_n) and cached; the reference remains valid.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_legendre(int order);

/// A(x) = int_0^1 int_t^1 exp(-x(u-t)/2) (1 - exp(-x t (1-u))) du dt.
///
/// For x <= 64 an order x order tensor Gauss-Legendre rule on the triangle
/// (u = t + (1-t)v) is used. Beyond that the inner integral is done in
/// closed form and the remaining 1-D integral uses panels graded towards
/// t = 0 and t = 1; for x >= 1e8 the expansion 2/x - 8/x^2 is returned.
/// Throws std::invalid_argument for x < 0 or NaN.
double a_function(double x, int order = 64);

struct CheckedValue {
  double value = 0.0;
  double error_estimate = 0.0;  ///< |A_order - A_{2 order}|
};
CheckedValue a_function_checked(double x, int order = 64);

/// Delta^2 sum_k |f_k|^2 A(Delta k^2) over the stored spectrum.
struct SpectralBound {
  double delta = 0.0;
  double value = 0.0;
  /// j* = ceil(-log2(sqrt(Delta))) and the contribution of k = +-2^{j*}.
  int j_star = 0;
  double dominant_term = 0.0;
};

/// Throws std::invalid_argument unless 0 < delta <= 1.
SpectralBound spectral_lower_value(const FourierSpectrum& spectrum, double delta);

/// ceil(-log2(sqrt(delta))) computed without rounding surprises at powers of 4.
int dominant_level(double delta);

struct GhatOptions {
  std::int64_t replications = 10000;
  std::uint64_t seed = 0;
  /// Trapezoid sub-steps on [t_lo, t_hi].
  std::int64_t substeps = 1024;
  int threads = 0;
  /// Separates the random streams of different (j, Delta) cells.
  std::uint32_t stream_family = 0;
};

/// Monte-Carlo check of E|g_j|^2 = 4 |f_j|^2 Delta^2 A(Delta j^2).
///
/// Each replication samples W and the coupled path on [t_lo, t_hi] with
/// pi = {t_lo, t_hi} and integrates exp(-ij W) - exp(-ij Wtilde) by the
/// trapezoid rule. The kernel fields carry the same comparison without the
/// factor |f_j|^2 and the z score is computed from them, so it stays
/// informative at frequencies where f_j = 0.
struct GhatResult {
  std::int64_t j = 0;
  double delta = 0.0;
  double coefficient_sq = 0.0;  ///< |f_j|^2
  double mc_estimate = 0.0;
  double closed_form = 0.0;
  double std_error = 0.0;
  double kernel_mc = 0.0;
  double kernel_closed = 0.0;
  double kernel_std_error = 0.0;
  double z_score = 0.0;
  std::int64_t replications = 0;
};

/// Throws std::invalid_argument for M < 100, t_lo >= t_hi, or an interval
/// outside [0, 1].
GhatResult ghat_identity_mc(const DriftModel& model, std::int64_t j, double t_lo, double t_hi,
                            const GhatOptions& options);

/// Exact expectation of the trapezoid-discretized kernel (an O(S^2) sum),
/// used to bound the quadrature bias of ghat_identity_mc.
double discrete_kernel_expectation(std::int64_t j, double delta, std::int64_t substeps);

/// Rows j,delta,mc_estimate,closed_form,std_error,z_score.
void write_ghat_csv(std::ostream& out, const std::vector<GhatResult>& rows, const Metadata& metadata);

}  // namespace driftlab
