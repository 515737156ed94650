#include "driftlab/dyadic_phase.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace driftlab::dyadic {

namespace {

__extension__ typedef unsigned __int128 uint128;

constexpr std::array<std::uint64_t, 128> kInvTwoPi = {
#include "inv_two_pi_bits.inc"
};
constexpr int kTableBits = 64 * static_cast<int>(kInvTwoPi.size());

// Bits b_{pos+1} .. b_{pos+64} of a big-endian binary fraction; bits outside
// the stored words read as zero.
template <std::size_t N>
inline std::uint64_t window(const std::array<std::uint64_t, N>& words, int count, long pos) {
  auto word = [&](long idx) -> std::uint64_t {
    return (idx >= 0 && idx < count) ? words[static_cast<std::size_t>(idx)] : 0u;
  };
  const long idx = pos >= 0 ? pos / 64 : -((-pos + 63) / 64);
  const int shift = static_cast<int>(pos - idx * 64);
  if (shift == 0) return word(idx);
  return (word(idx) << shift) | (word(idx + 1) >> (64 - shift));
}

constexpr int kMaxWords = (kMaxTerms + 128) / 64 + 2;

// sin and cos of 2 pi k / 1024 for k = -512..512; the remaining phase is at
// most 2^-11 turns and handled by short Taylor polynomials.
constexpr int kTableSteps = 1024;

struct TurnTable {
  std::array<double, kTableSteps + 1> sin{};
  std::array<double, kTableSteps + 1> cos{};
  std::array<double, kTableSteps + 1> versine{};
  TurnTable() {
    for (int k = 0; k <= kTableSteps; ++k) {
      const long double angle =
          2.0L * std::numbers::pi_v<long double> * static_cast<long double>(k - kTableSteps / 2) /
          static_cast<long double>(kTableSteps);
      sin[static_cast<std::size_t>(k)] = static_cast<double>(std::sin(angle));
      cos[static_cast<std::size_t>(k)] = static_cast<double>(std::cos(angle));
      const long double half = std::sin(0.5L * angle);
      versine[static_cast<std::size_t>(k)] = static_cast<double>(2.0L * half * half);
    }
  }
};

const TurnTable kTurns;

struct Split {
  std::size_t index;
  double theta;
};

inline Split split(double s) noexcept {
  const double t = s * kTableSteps;
  const double k = std::nearbyint(t);
  return {static_cast<std::size_t>(static_cast<long>(k) + kTableSteps / 2),
          2.0 * std::numbers::pi * ((t - k) / kTableSteps)};
}

// Compensated summation with Knuth's branch-free two-sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double term) noexcept {
    const double next = sum + term;
    const double back = next - sum;
    carry += (sum - (next - back)) + (term - back);
    sum = next;
  }
  double value() const noexcept { return sum + carry; }
};

inline double small_sin(double x) noexcept {
  const double x2 = x * x;
  return x * (1.0 - x2 * (1.0 / 6.0 - x2 * (1.0 / 120.0 - x2 * (1.0 / 5040.0))));
}

inline double small_cos(double x) noexcept {
  const double x2 = x * x;
  return 1.0 - x2 * (0.5 - x2 * (1.0 / 24.0 - x2 * (1.0 / 720.0 - x2 * (1.0 / 40320.0))));
}

}  // namespace

std::uint64_t inv_two_pi_leading_word() noexcept { return kInvTwoPi[0]; }

double sin_2pi(double s) noexcept {
  const Split p = split(s);
  return kTurns.sin[p.index] * small_cos(p.theta) + kTurns.cos[p.index] * small_sin(p.theta);
}

double cos_2pi(double s) noexcept {
  const Split p = split(s);
  return kTurns.cos[p.index] * small_cos(p.theta) - kTurns.sin[p.index] * small_sin(p.theta);
}

namespace {

// Fixed-point phases: bits[j-1] / 2^64 = frac(2^j |x| / (2 pi)) as a signed
// number in [-1/2, 1/2). Returns the sign of x.
int fixed_phases(double x, int terms, std::int64_t* bits) {
  if (!std::isfinite(x)) throw std::domain_error("dyadic::phases: non-finite argument");
  if (terms < 0 || terms > kMaxTerms) {
    throw std::length_error("dyadic::phases: unsupported number of terms");
  }
  if (x == 0.0) {
    for (int j = 0; j < terms; ++j) bits[j] = 0;
    return 0;
  }
  const int sign = x < 0.0 ? -1 : 1;
  // |x| = mantissa * 2^shift with an integer mantissa below 2^53.
  const auto raw = std::bit_cast<std::uint64_t>(x);
  const auto biased = static_cast<long>((raw >> 52) & 0x7ffu);
  std::uint64_t mantissa = raw & ((std::uint64_t{1} << 52) - 1);
  long shift = -1074;
  if (biased != 0) {
    mantissa |= std::uint64_t{1} << 52;
    shift = biased - 1075;
  }

  const int words = (terms + 128 + 63) / 64;
  if (shift + 64L * words > kTableBits) {
    throw std::length_error("dyadic::phases: argument too large for the 1/(2 pi) expansion");
  }

  // frac(|x| / (2 pi)) = frac(mantissa * W) with W = frac(2^shift / (2 pi)).
  std::array<std::uint64_t, kMaxWords + 1> fraction{};
  uint128 carry = 0;
  for (int k = words - 1; k >= 0; --k) {
    const std::uint64_t w = window(kInvTwoPi, static_cast<int>(kInvTwoPi.size()), shift + 64L * k);
    const uint128 prod = static_cast<uint128>(mantissa) * w + carry;
    fraction[static_cast<std::size_t>(k)] = static_cast<std::uint64_t>(prod);
    carry = prod >> 64;
  }

  for (int j = 1; j <= terms; ++j) {
    const auto word = static_cast<std::size_t>(j >> 6);
    const int offset = j & 63;
    const uint128 pair = (static_cast<uint128>(fraction[word]) << 64) | fraction[word + 1];
    bits[j - 1] = static_cast<std::int64_t>(static_cast<std::uint64_t>((pair << offset) >> 64));
  }
  return sign;
}

constexpr int kIndexShift = 64 - 10;  // 2^10 == kTableSteps

struct FixedSplit {
  std::size_t index;
  double theta;
};

inline FixedSplit split_fixed(std::int64_t b) noexcept {
  const std::int64_t k = (b + (std::int64_t{1} << (kIndexShift - 1))) >> kIndexShift;
  const std::int64_t rest = b - k * (std::int64_t{1} << kIndexShift);
  return {static_cast<std::size_t>(k + kTableSteps / 2),
          static_cast<double>(rest) * (2.0 * std::numbers::pi * 0x1p-64)};
}

// 1 - cos(theta) without cancellation.
inline double small_versine(double x) noexcept {
  const double x2 = x * x;
  return x2 * (0.5 - x2 * (1.0 / 24.0 - x2 * (1.0 / 720.0 - x2 * (1.0 / 40320.0))));
}

}  // namespace

int phases(double x, int terms, std::span<double> out) {
  if (terms >= 0 && out.size() < static_cast<std::size_t>(terms)) {
    throw std::length_error("dyadic::phases: output too short");
  }
  std::array<std::int64_t, kMaxTerms> bits;
  const int sign = fixed_phases(x, terms, bits.data());
  for (int j = 0; j < terms; ++j) {
    out[static_cast<std::size_t>(j)] = static_cast<double>(bits[static_cast<std::size_t>(j)]) * 0x1p-64;
  }
  return sign;
}

WeightedSums weighted_sums(double x, std::span<const double> sin_weights,
                           std::span<const double> versine_weights) {
  const int terms = static_cast<int>(std::max(sin_weights.size(), versine_weights.size()));
  std::array<std::int64_t, kMaxTerms> bits;
  const int sign = fixed_phases(x, terms, bits.data());
  WeightedSums out;
  if (sign == 0) return out;
  const bool want_sin = !sin_weights.empty();
  const bool want_vers = !versine_weights.empty();
  CompensatedSum sin_acc;
  CompensatedSum vers_acc;
  for (std::size_t j = 0; j < static_cast<std::size_t>(terms); ++j) {
    const FixedSplit p = split_fixed(bits[j]);
    const double st = small_sin(p.theta);
    if (want_sin && j < sin_weights.size()) {
      const double sn = kTurns.sin[p.index] * small_cos(p.theta) + kTurns.cos[p.index] * st;
      sin_acc.add(sin_weights[j] * sn);
    }
    if (want_vers && j < versine_weights.size()) {
      // 1 - cos(a + t) = (1 - cos a) + cos a (1 - cos t) + sin a sin t
      const double vers = kTurns.versine[p.index] + kTurns.cos[p.index] * small_versine(p.theta) +
                          kTurns.sin[p.index] * st;
      vers_acc.add(versine_weights[j] * vers);
    }
  }
  out.sin_sum = sign * sin_acc.value();
  out.versine_sum = vers_acc.value();
  return out;
}

}  // namespace driftlab::dyadic
