#pragma once

#include <cstdint>
#include <span>

namespace driftlab::dyadic {

/// Largest number of dyadic terms a single phase expansion supports.
inline constexpr int kMaxTerms = 4096;

/// Exact phases of the dyadic multiples 2^j x, j = 1..terms.
///
/// For |x| the signed fraction s_j in [-1/2, 1/2) with 2^j |x| = 2*pi*(k + s_j)
/// is computed from a multi-word product of the mantissa of x with a 8192-bit
/// expansion of 1/(2*pi); no large argument is ever handed to a libm routine.
/// The fixed-point phases are accurate to 2^-60 for every j; rounding them to
/// double adds at most 2^-54.
///
/// Returns the sign of x (+1, -1, or 0 for x == 0, in which case all phases
/// are zero). Throws std::domain_error for non-finite x and
/// std::length_error if the expansion is too short for (x, terms).
int phases(double x, int terms, std::span<double> out);

struct WeightedSums {
  double sin_sum = 0.0;      ///< sum_j w_j sin(2^j x)
  double versine_sum = 0.0;  ///< sum_j v_j (1 - cos(2^j x))
};

/// Compensated sums over j = 1..max(|w|, |v|) using exactly reduced phases.
/// Either weight span may be empty. Same exceptions as phases().
WeightedSums weighted_sums(double x, std::span<const double> sin_weights,
                           std::span<const double> versine_weights);

/// sin(2*pi*s) for s in [-1/2, 1/2].
double sin_2pi(double s) noexcept;
/// cos(2*pi*s) for s in [-1/2, 1/2].
double cos_2pi(double s) noexcept;

/// Leading 64 bits of the expansion of 1/(2*pi) (for self-checks).
std::uint64_t inv_two_pi_leading_word() noexcept;

}  // namespace driftlab::dyadic
