#include "driftlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace driftlab {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& ctr,
                         const std::array<std::uint32_t, 2>& key) noexcept {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

inline double to_open_unit(std::uint64_t bits) noexcept {
  // 53 random bits centred in their cell: strictly inside (0,1).
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    philox_round(counter, key);
  }
  return counter;
}

std::array<double, 2> CounterStream::uniforms(std::uint64_t block) const noexcept {
  const std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(block),
                                            static_cast<std::uint32_t>(block >> 32) ^ key_.family,
                                            key_.role, key_.replication};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(key_.seed),
                                            static_cast<std::uint32_t>(key_.seed >> 32)};
  const auto r = philox4x32(ctr, key);
  const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
  const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
  return {to_open_unit(a), to_open_unit(b)};
}

namespace {

inline std::array<double, 2> box_muller(const std::array<double, 2>& u) noexcept {
  const double radius = std::sqrt(-2.0 * std::log(u[0]));
  const double angle = 2.0 * std::numbers::pi * u[1];
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace

double CounterStream::normal(std::uint64_t index) const noexcept {
  const auto z = box_muller(uniforms(index >> 1));
  return z[index & 1u];
}

void CounterStream::fill_normals(std::span<double> out, std::uint64_t first) const noexcept {
  std::size_t i = 0;
  std::uint64_t index = first;
  if ((index & 1u) != 0 && i < out.size()) {
    out[i++] = normal(index++);
  }
  for (; i + 1 < out.size(); i += 2, index += 2) {
    const auto z = box_muller(uniforms(index >> 1));
    out[i] = z[0];
    out[i + 1] = z[1];
  }
  if (i < out.size()) out[i] = normal(index);
}

}  // namespace driftlab
