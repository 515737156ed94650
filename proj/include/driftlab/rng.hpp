#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace driftlab {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Pure function of
/// (counter, key); this is the only source of randomness in the library.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Identifies one independent random stream.
///
/// Streams are addressed by the experiment seed, the replication index and a
/// role (e.g. the driving Brownian motion, or the bridge on interval i of a
/// coupling grid). `family` separates otherwise identical roles, such as the
/// bridges used for different grid sizes within one sweep.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint32_t replication = 0;
  std::uint32_t role = 0;
  std::uint32_t family = 0;
};

namespace roles {
inline constexpr std::uint32_t brownian = 0;
/// Bridge on interval i of a coupling grid uses role `bridge_base + i`.
inline constexpr std::uint32_t bridge_base = 1;
}  // namespace roles

/// Random-access stream of i.i.d. uniforms in (0,1) and standard normals.
///
/// Value k depends only on (key, k), so any subset can be generated in any
/// order and by any thread with identical results.
class CounterStream {
 public:
  explicit CounterStream(StreamKey key) noexcept : key_(key) {}

  /// Two uniforms in the open interval (0,1) from counter block `block`.
  std::array<double, 2> uniforms(std::uint64_t block) const noexcept;

  /// Standard normal number `index` (Box-Muller on block index/2).
  double normal(std::uint64_t index) const noexcept;

  /// out[i] = normal(first + i).
  void fill_normals(std::span<double> out, std::uint64_t first) const noexcept;

  const StreamKey& key() const noexcept { return key_; }

 private:
  StreamKey key_;
};

}  // namespace driftlab
