#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "driftlab/drift_models.hpp"
#include "driftlab/transform.hpp"

namespace driftlab {

enum class SchemeKind { euler, milstein_transformed, reference_euler };

std::string to_string(SchemeKind kind);

/// Minimum ratio between the master grid and any scheme compared with the
/// fine-grid reference.
inline constexpr std::int64_t kMinReferenceRatio = 64;

struct SchemeRun {
  SchemeKind scheme = SchemeKind::euler;
  std::int64_t steps = 0;
  double initial = 0.0;
  double endpoint = 0.0;
  /// Euler: values at i/n. Milstein: values at every master time.
  std::vector<double> trajectory;
  /// 1 if the run left the transform table and was abandoned (endpoint NaN).
  std::int64_t range_breaches = 0;
};

/// Equidistant Euler scheme X_{i+1} = X_i + mu(X_i)/n + (W_{(i+1)/n} - W_{i/n})
/// driven by the master-grid path `w` (w[0] = W_0). Throws
/// std::invalid_argument unless n divides the number of master steps.
SchemeRun euler(const DriftModel& model, double x0, std::span<const double> w, std::int64_t n,
                bool store_trajectory = false);

struct MilsteinOptions {
  bool store_trajectory = false;
  /// Use b' = 0, which turns the scheme into Euler for dY = b(Y) dW.
  bool drop_correction = false;
};

/// Time-continuous Milstein-type scheme for dY = b(Y) dW on the knots l/n,
///   Y_t = Y_l + b(Y_l)(W_t - W_l) + b b'(Y_l)((W_t - W_l)^2 - (t - l/n)) / 2,
/// evaluated at every master time.
SchemeRun milstein_transformed(const TransformTable& table, double y0, std::span<const double> w,
                               std::int64_t n, const MilsteinOptions& options = {});

/// Euler on the full master grid, used as a proxy for the exact solution.
/// Throws std::invalid_argument if the master grid is finer than
/// `compared_n` by less than kMinReferenceRatio.
SchemeRun reference_solution(const DriftModel& model, double x0, std::span<const double> w,
                             std::int64_t compared_n, bool store_trajectory = false);

}  // namespace driftlab
