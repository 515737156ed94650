#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "driftlab/brownian.hpp"
#include "driftlab/csv.hpp"
#include "driftlab/drift_models.hpp"
#include "driftlab/parallel.hpp"
#include "driftlab/schemes.hpp"
#include "driftlab/transform.hpp"

namespace driftlab {

/// Monte-Carlo estimate of (E|e|^p)^{1/p}.
struct ErrorEstimate {
  std::int64_t n = 0;
  double p = 1.0;
  double mean_error = 0.0;
  double std_error = 0.0;
  std::int64_t replications = 0;
  std::int64_t range_breaches = 0;
};

/// (mean |e|^p)^{1/p} with a delete-one-batch jackknife standard error over
/// `batches` contiguous batches (fewer if there are fewer samples). Throws
/// std::invalid_argument for fewer than 2 samples or p < 1.
ErrorEstimate estimate_lp(std::span<const double> abs_errors, double p, int batches = 20);

struct RatePoint {
  double n = 0.0;
  double error = 0.0;
};

/// Least-squares fit of log(error) = intercept - slope * log(n).
struct RateFit {
  std::vector<RatePoint> points;
  double slope = 0.0;  ///< empirical rate r in error ~ C n^{-r}
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_se = 0.0;
  double slope_ci_lo = 0.0;  ///< 95% band from the Student t quantile
  double slope_ci_hi = 0.0;
  int dropped = 0;  ///< smallest-n points removed by rate_fit_windowed
};

/// Throws std::invalid_argument for fewer than 3 points, non-increasing n,
/// or a non-positive error.
RateFit rate_fit(std::span<const RatePoint> points);

/// rate_fit, refitted once without the smallest n when r_squared is below
/// `threshold` and at least 4 points are available.
RateFit rate_fit_windowed(std::span<const RatePoint> points, double threshold = 0.98);

enum class GridPolicy { uniform_augmented, user };

std::string to_string(GridPolicy policy);

struct SweepConfig {
  std::vector<std::int64_t> n_list;
  std::vector<double> p_list{1.0};
  std::int64_t replications = 0;
  std::uint64_t seed = 0;
  double x0 = 0.0;
  std::int64_t master_ratio = kMinReferenceRatio;
  /// Explicit master grid size; 0 derives it from master_ratio.
  std::int64_t master_n = 0;
  int threads = 0;
  int batches = 20;
  /// Milstein sweeps: transform table.
  double half_width = 8.0;
  TransformOptions transform;
  /// Coupling sweeps.
  GridPolicy grid_policy = GridPolicy::uniform_augmented;
  std::vector<TimeGrid> user_grids;
  ProgressFn progress;
};

struct SweepResult {
  std::vector<ErrorEstimate> estimates;  ///< ordered by n, then p
  std::vector<RateFit> fits;             ///< one per usable p (none if < 3 n values)
  std::vector<double> fit_p;             ///< p of each entry of fits
  std::int64_t master_n = 0;
  std::int64_t range_breaches = 0;       ///< replications abandoned
  double transform_interp_error = 0.0;   ///< Milstein sweeps only

  const ErrorEstimate& at(std::int64_t n, double p) const;
};

/// Same-path errors against the fine Euler reference: endpoint error for
/// Euler, and sup over master times of |Y^M_n - G(X_ref)| for the transformed
/// Milstein scheme. Every n must divide master_n / master_ratio.
SweepResult scheme_error_sweep(const DriftModel& model, SchemeKind scheme, const SweepConfig& config);

/// Coupled-solution gap (E|X_1 - Xtilde_1|^p)^{1/p}, both solved by the fine
/// reference on W and on the coupled path for each grid.
SweepResult coupling_gap_sweep(const DriftModel& model, const SweepConfig& config);

/// Rows n,p,mean_error,std_error,M,breaches,seed after the metadata lines.
void write_sweep_csv(std::ostream& out, const SweepResult& result, const Metadata& metadata,
                     std::uint64_t seed);

}  // namespace driftlab
