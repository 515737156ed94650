#include "driftlab/brownian.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <stdexcept>

namespace driftlab {

namespace {

constexpr double kTieTol = 1e-12;

std::vector<double> base_points(int n) {
  std::vector<double> pts;
  pts.reserve(static_cast<std::size_t>(4 * n) + 1);
  for (int j = 0; j <= 4 * n; ++j) pts.push_back(static_cast<double>(j) / (4.0 * n));
  return pts;
}

bool contains_close(const std::vector<double>& sorted, double t, double tol) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), t - tol);
  return it != sorted.end() && std::fabs(*it - t) <= tol;
}

}  // namespace

TimeGrid uniform_grid(int n) {
  if (n < 1) throw std::invalid_argument("uniform_grid: n must be positive");
  TimeGrid g;
  g.points.resize(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) g.points[static_cast<std::size_t>(i)] = static_cast<double>(i) / n;
  g.n = n;
  return g;
}

TimeGrid plain_grid(std::vector<double> times) {
  for (double t : times) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("plain_grid: times must lie in [0,1]");
  }
  times.push_back(0.0);
  times.push_back(1.0);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  TimeGrid g;
  g.points = std::move(times);
  g.n = static_cast<int>(g.size());
  return g;
}

TimeGrid make_augmented_grid(int n, std::span<const double> extra) {
  if (n < 1) throw std::invalid_argument("make_augmented_grid: n must be positive");
  std::vector<double> pts = base_points(n);
  std::vector<double> added;
  for (double t : extra) {
    if (!(t > 0.0 && t < 1.0)) {
      throw std::invalid_argument("make_augmented_grid: extra times must lie in (0,1)");
    }
    if (!std::binary_search(pts.begin(), pts.end(), t)) added.push_back(t);
  }
  std::sort(added.begin(), added.end());
  added.erase(std::unique(added.begin(), added.end()), added.end());
  if (added.size() > static_cast<std::size_t>(n)) {
    throw std::invalid_argument("make_augmented_grid: more than n extra points");
  }
  pts.insert(pts.end(), added.begin(), added.end());
  std::sort(pts.begin(), pts.end());

  const std::size_t target = static_cast<std::size_t>(5 * n) + 1;
  while (pts.size() < target) {
    std::size_t best = 0;
    double best_len = -1.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double len = pts[i + 1] - pts[i];
      if (len > best_len * (1.0 + kTieTol)) {
        best_len = len;
        best = i;
      }
    }
    pts.insert(pts.begin() + static_cast<std::ptrdiff_t>(best) + 1, 0.5 * (pts[best] + pts[best + 1]));
  }

  TimeGrid g;
  g.points = std::move(pts);
  g.grid_class = GridClass::augmented;
  g.n = n;
  return g;
}

bool satisfies_augmented_invariants(const TimeGrid& grid) {
  const int n = grid.n;
  const auto& p = grid.points;
  if (n < 1 || p.size() != static_cast<std::size_t>(5 * n) + 1) return false;
  if (p.front() != 0.0 || p.back() != 1.0) return false;
  if (!std::is_sorted(p.begin(), p.end()) || std::adjacent_find(p.begin(), p.end()) != p.end()) {
    return false;
  }
  const double quarter = 1.0 / (4.0 * n);
  for (double t : base_points(n)) {
    if (!contains_close(p, t, 1e-15)) return false;
  }
  int exact_right = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    const double len = p[i] - p[i - 1];
    if (len > quarter * (1.0 + kTieTol)) return false;
    if (p[i - 1] >= 0.5 && std::fabs(len - quarter) <= quarter * kTieTol) ++exact_right;
  }
  return exact_right >= n;
}

std::vector<std::int64_t> nesting_indices(const TimeGrid& grid, std::int64_t master_n) {
  if (master_n < 1) throw std::invalid_argument("nesting_indices: master_n must be positive");
  std::vector<std::int64_t> idx;
  idx.reserve(grid.points.size());
  for (double t : grid.points) {
    const double scaled = t * static_cast<double>(master_n);
    const double k = std::nearbyint(scaled);
    if (std::fabs(scaled - k) > 1e-7) {
      throw std::invalid_argument("nesting_indices: grid point is not on the master grid");
    }
    idx.push_back(static_cast<std::int64_t>(k));
  }
  if (idx.empty() || idx.front() != 0 || idx.back() != master_n ||
      std::adjacent_find(idx.begin(), idx.end(), std::greater_equal<>()) != idx.end()) {
    throw std::invalid_argument("nesting_indices: grid must run from 0 to 1 on distinct master times");
  }
  return idx;
}

std::vector<double> sample_brownian(std::int64_t master_n, const StreamKey& key, double horizon) {
  if (master_n < 1) throw std::invalid_argument("sample_brownian: master_n must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("sample_brownian: horizon must be positive");
  const auto n = static_cast<std::uint64_t>(master_n);
  const int levels = std::countr_zero(n);
  const std::uint64_t q = n >> levels;
  const double h = horizon / static_cast<double>(master_n);

  StreamKey k = key;
  k.role = roles::brownian;
  const CounterStream stream(k);
  std::vector<double> w(n + 1, 0.0);
  std::vector<double> z(std::max<std::uint64_t>(q, n / 2));

  const std::uint64_t coarse = std::uint64_t{1} << levels;
  stream.fill_normals(std::span(z.data(), q), 0);
  const double coarse_sd = std::sqrt(h * static_cast<double>(coarse));
  for (std::uint64_t c = 0; c < q; ++c) w[(c + 1) * coarse] = w[c * coarse] + coarse_sd * z[c];

  for (int level = 1; level <= levels; ++level) {
    const std::uint64_t stride = coarse >> (level - 1);
    const std::uint64_t half = stride / 2;
    const std::uint64_t count = q << (level - 1);
    stream.fill_normals(std::span(z.data(), count), count);
    const double sd = std::sqrt(0.5 * h * static_cast<double>(half));
    for (std::uint64_t r = 0; r < count; ++r) {
      const std::uint64_t a = r * stride;
      w[a + half] = 0.5 * (w[a] + w[a + stride]) + sd * z[r];
    }
  }
  return w;
}

namespace {

void check_indices(std::span<const double> path, std::span<const std::int64_t> indices) {
  const auto n = static_cast<std::int64_t>(path.size()) - 1;
  if (n < 1 || indices.size() < 2 || indices.front() != 0 || indices.back() != n) {
    throw std::invalid_argument("grid indices must start at 0 and end at the last master point");
  }
  for (std::size_t i = 1; i < indices.size(); ++i) {
    if (indices[i] <= indices[i - 1]) throw std::invalid_argument("grid indices must increase");
  }
}

}  // namespace

std::vector<double> piecewise_linear(std::span<const double> path,
                                     std::span<const std::int64_t> indices) {
  check_indices(path, indices);
  std::vector<double> out(path.size());
  for (std::size_t i = 1; i < indices.size(); ++i) {
    const auto a = static_cast<std::size_t>(indices[i - 1]);
    const auto b = static_cast<std::size_t>(indices[i]);
    const double len = static_cast<double>(b - a);
    out[a] = path[a];
    for (std::size_t k = a + 1; k < b; ++k) {
      const double s = static_cast<double>(k - a) / len;
      out[k] = s * path[b] + (1.0 - s) * path[a];
    }
  }
  out.back() = path.back();
  return out;
}

std::vector<double> piecewise_linear(std::span<const double> path, const TimeGrid& grid) {
  const auto idx = nesting_indices(grid, static_cast<std::int64_t>(path.size()) - 1);
  return piecewise_linear(path, idx);
}

void couple_bridges(std::span<double> path, std::span<const std::int64_t> indices, StreamKey key,
                    double horizon) {
  check_indices(path, indices);
  const double h = horizon / static_cast<double>(path.size() - 1);
  std::vector<double> z;
  for (std::size_t i = 1; i < indices.size(); ++i) {
    const auto a = static_cast<std::size_t>(indices[i - 1]);
    const auto b = static_cast<std::size_t>(indices[i]);
    if (b - a < 2) continue;
    StreamKey k = key;
    k.role = key.role + static_cast<std::uint32_t>(i - 1);
    z.resize(b - a - 1);
    CounterStream(k).fill_normals(z, 0);
    const double len = static_cast<double>(b - a);
    double bridge = 0.0;
    for (std::size_t m = a + 1; m < b; ++m) {
      // Remaining steps to the pinned endpoint, seen from m - 1.
      const double rem = static_cast<double>(b - (m - 1));
      bridge = bridge * (rem - 1.0) / rem + std::sqrt(h * (rem - 1.0) / rem) * z[m - a - 1];
      const double s = static_cast<double>(m - a) / len;
      path[m] = s * path[b] + (1.0 - s) * path[a] + bridge;
    }
  }
}

CoupledPathPair sample_coupled_pair(std::int64_t master_n, const TimeGrid& pi, StreamKey key,
                                    std::uint32_t bridge_tag) {
  CoupledPathPair pair;
  pair.master_n = master_n;
  pair.pi = pi;
  pair.pi_indices = nesting_indices(pi, master_n);
  pair.w = sample_brownian(master_n, key);
  pair.w_tilde = pair.w;
  StreamKey bridges = key;
  bridges.role = roles::bridge_base;
  bridges.family = bridge_tag;
  couple_bridges(pair.w_tilde, pair.pi_indices, bridges);
  return pair;
}

double bridge_cross_variance(double t_lo, double t_hi, double t, double u) {
  if (!(t_lo < t_hi && t_lo <= t && t <= u && u <= t_hi)) {
    throw std::invalid_argument("bridge_cross_variance: need t_lo <= t <= u <= t_hi, t_lo < t_hi");
  }
  return (u - t) + 2.0 * (t - t_lo) * (t_hi - u) / (t_hi - t_lo);
}

void write_path_csv(std::ostream& out, const CoupledPathPair& pair) {
  out << "t,W,W_tilde\n";
  char line[96];
  for (std::size_t k = 0; k < pair.w.size(); ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(pair.master_n);
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", t, pair.w[k], pair.w_tilde[k]);
    out << line;
  }
}

}  // namespace driftlab
