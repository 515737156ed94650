#include "driftlab/schemes.hpp"

#include <limits>
#include <stdexcept>

namespace driftlab {

namespace {

std::int64_t master_steps(std::span<const double> w) {
  if (w.size() < 2) throw std::invalid_argument("scheme: path needs at least two values");
  return static_cast<std::int64_t>(w.size()) - 1;
}

std::int64_t stride_for(std::span<const double> w, std::int64_t n) {
  const std::int64_t big_n = master_steps(w);
  if (n < 1 || big_n % n != 0) {
    throw std::invalid_argument("scheme: n must divide the number of master steps");
  }
  return big_n / n;
}

}  // namespace

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::euler:
      return "euler";
    case SchemeKind::milstein_transformed:
      return "milstein-transformed";
    case SchemeKind::reference_euler:
      return "reference-euler";
  }
  return "unknown";
}

SchemeRun euler(const DriftModel& model, double x0, std::span<const double> w, std::int64_t n,
                bool store_trajectory) {
  const auto stride = static_cast<std::size_t>(stride_for(w, n));
  SchemeRun run;
  run.scheme = SchemeKind::euler;
  run.steps = n;
  run.initial = x0;
  const double dt = 1.0 / static_cast<double>(n);
  if (store_trajectory) {
    run.trajectory.reserve(static_cast<std::size_t>(n) + 1);
    run.trajectory.push_back(x0);
  }
  double x = x0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    x = x + model(x) * dt + (w[(i + 1) * stride] - w[i * stride]);
    if (store_trajectory) run.trajectory.push_back(x);
  }
  run.endpoint = x;
  return run;
}

SchemeRun milstein_transformed(const TransformTable& table, double y0, std::span<const double> w,
                               std::int64_t n, const MilsteinOptions& options) {
  const auto stride = static_cast<std::size_t>(stride_for(w, n));
  const double h = 1.0 / static_cast<double>(master_steps(w));
  SchemeRun run;
  run.scheme = SchemeKind::milstein_transformed;
  run.steps = n;
  run.initial = y0;
  if (options.store_trajectory) {
    run.trajectory.reserve(w.size());
    run.trajectory.push_back(y0);
  }
  double y = y0;
  for (std::size_t l = 0; l < static_cast<std::size_t>(n); ++l) {
    DiffusionSample d;
    try {
      d = table.diffusion(y);
    } catch (const std::out_of_range&) {
      run.range_breaches = 1;
      run.endpoint = std::numeric_limits<double>::quiet_NaN();
      return run;
    }
    const double b = d.b;
    const double half_bb = options.drop_correction ? 0.0 : 0.5 * d.b * d.b_prime;
    const std::size_t base = l * stride;
    const double w_base = w[base];
    double yt = y;
    for (std::size_t k = 1; k <= stride; ++k) {
      const double dw = w[base + k] - w_base;
      const double dt = static_cast<double>(k) * h;
      yt = y + b * dw + half_bb * (dw * dw - dt);
      if (options.store_trajectory) run.trajectory.push_back(yt);
    }
    y = yt;
  }
  run.endpoint = y;
  return run;
}

SchemeRun reference_solution(const DriftModel& model, double x0, std::span<const double> w,
                             std::int64_t compared_n, bool store_trajectory) {
  const std::int64_t big_n = master_steps(w);
  if (compared_n < 1 || big_n < kMinReferenceRatio * compared_n) {
    throw std::invalid_argument("reference_solution: master grid must be at least 64 times finer");
  }
  SchemeRun run = euler(model, x0, w, big_n, store_trajectory);
  run.scheme = SchemeKind::reference_euler;
  return run;
}

}  // namespace driftlab
