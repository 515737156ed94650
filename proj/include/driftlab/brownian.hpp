#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "driftlab/rng.hpp"

namespace driftlab {

enum class GridClass { plain, augmented };

/// Discretization 0 = t_0 < t_1 < ... < t_m = 1. `points` includes t_0.
struct TimeGrid {
  std::vector<double> points;
  GridClass grid_class = GridClass::plain;
  /// n for the augmented class (m = 5n), m for plain grids.
  int n = 0;

  /// Number of points after t_0.
  std::size_t size() const noexcept { return points.empty() ? 0 : points.size() - 1; }
};

/// Equidistant grid {i/n}.
TimeGrid uniform_grid(int n);

/// Grid with points `times` (sorted, deduplicated, 0 and 1 added).
TimeGrid plain_grid(std::vector<double> times);

/// Member of the augmented class: contains j/(4n), j = 1..4n, and every
/// extra time, padded to exactly 5n points after 0. Fillers are midpoints of
/// the currently largest intervals, leftmost first. Throws
/// std::invalid_argument if n < 1, an extra time lies outside (0,1), or
/// more than n extra times are new.
TimeGrid make_augmented_grid(int n, std::span<const double> extra = {});

/// Checks the augmented-class invariants (coverage of j/(4n), 5n points,
/// max spacing <= 1/(4n), at least n intervals of length 1/(4n) right of 1/2).
bool satisfies_augmented_invariants(const TimeGrid& grid);

/// Master-grid indices of the grid points on a uniform grid with N steps.
/// Throws std::invalid_argument if some point is not a master time.
std::vector<std::int64_t> nesting_indices(const TimeGrid& grid, std::int64_t master_n);

/// Brownian path on the uniform grid k * horizon / N, k = 0..N.
///
/// Values are built hierarchically: for N = q 2^k with q odd, the path at
/// multiples of horizon/q comes from q increments, followed by k levels of
/// midpoint bridges. The value at a given time therefore does not change
/// when N is doubled, if the stream key is kept.
std::vector<double> sample_brownian(std::int64_t master_n, const StreamKey& key,
                                    double horizon = 1.0);

/// Piecewise-linear interpolation of `path` through the points with the
/// given master indices (which must start at 0 and end at N). Throws
/// std::invalid_argument for malformed indices.
std::vector<double> piecewise_linear(std::span<const double> path,
                                     std::span<const std::int64_t> indices);
std::vector<double> piecewise_linear(std::span<const double> path, const TimeGrid& grid);

/// Replaces the bridges of `path` between consecutive knots by independent
/// Brownian bridges, in place: the result is Wbar + Btilde. Knot values are
/// untouched. Interval i draws its normals, left to right, from `key` with
/// role key.role + i.
void couple_bridges(std::span<double> path, std::span<const std::int64_t> indices,
                    StreamKey key, double horizon = 1.0);

struct CoupledPathPair {
  std::int64_t master_n = 0;
  std::vector<double> w;
  std::vector<double> w_tilde;
  TimeGrid pi;
  std::vector<std::int64_t> pi_indices;
};

/// Samples W from `key` (role roles::brownian) and the bridges from roles
/// roles::bridge_base + i with family `bridge_tag`.
CoupledPathPair sample_coupled_pair(std::int64_t master_n, const TimeGrid& pi, StreamKey key,
                                    std::uint32_t bridge_tag = 0);

/// Variance of W_t - Wtilde_u for t_lo <= t <= u <= t_hi inside one grid
/// interval. Throws std::invalid_argument on ordering violations.
double bridge_cross_variance(double t_lo, double t_hi, double t, double u);

/// Columns t,W,W_tilde.
void write_path_csv(std::ostream& out, const CoupledPathPair& pair);

}  // namespace driftlab
