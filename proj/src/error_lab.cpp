#include "driftlab/error_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace driftlab {

ErrorEstimate estimate_lp(std::span<const double> abs_errors, double p, int batches) {
  const auto m = static_cast<std::int64_t>(abs_errors.size());
  if (m < 2) throw std::invalid_argument("estimate_lp: need at least 2 samples");
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("estimate_lp: p must be >= 1");
  if (batches < 2) throw std::invalid_argument("estimate_lp: need at least 2 batches");
  const std::int64_t nb = std::min<std::int64_t>(batches, m);

  std::vector<double> sums(static_cast<std::size_t>(nb), 0.0);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(nb), 0);
  double total = 0.0;
  for (std::int64_t b = 0; b < nb; ++b) {
    // Contiguous batches whose sizes differ by at most one.
    const std::int64_t lo = b * m / nb;
    const std::int64_t hi = (b + 1) * m / nb;
    double s = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) s += std::pow(std::fabs(abs_errors[static_cast<std::size_t>(i)]), p);
    sums[static_cast<std::size_t>(b)] = s;
    counts[static_cast<std::size_t>(b)] = hi - lo;
    total += s;
  }

  ErrorEstimate est;
  est.p = p;
  est.replications = m;
  est.mean_error = std::pow(total / static_cast<double>(m), 1.0 / p);
  std::vector<double> loo(static_cast<std::size_t>(nb));
  double loo_mean = 0.0;
  for (std::size_t b = 0; b < loo.size(); ++b) {
    const double rest = std::max(total - sums[b], 0.0);
    loo[b] = std::pow(rest / static_cast<double>(m - counts[b]), 1.0 / p);
    loo_mean += loo[b];
  }
  loo_mean /= static_cast<double>(nb);
  double ss = 0.0;
  for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
  est.std_error = std::sqrt(ss * static_cast<double>(nb - 1) / static_cast<double>(nb));
  return est;
}

RateFit rate_fit(std::span<const RatePoint> points) {
  if (points.size() < 3) throw std::invalid_argument("rate_fit: need at least 3 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].error > 0.0) || !std::isfinite(points[i].error)) {
      throw std::invalid_argument("rate_fit: errors must be positive and finite");
    }
    if (!(points[i].n > 0.0) || (i > 0 && !(points[i].n > points[i - 1].n))) {
      throw std::invalid_argument("rate_fit: n values must be positive and strictly increasing");
    }
  }
  const auto k = static_cast<double>(points.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& pt : points) {
    mx += std::log(pt.n);
    my += std::log(pt.error);
  }
  mx /= k;
  my /= k;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& pt : points) {
    const double dx = std::log(pt.n) - mx;
    const double dy = std::log(pt.error) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double beta = sxy / sxx;
  RateFit fit;
  fit.points.assign(points.begin(), points.end());
  fit.slope = -beta;
  fit.intercept = my - beta * mx;
  const double ss_res = std::max(syy - beta * sxy, 0.0);
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  const double dof = k - 2.0;
  fit.slope_se = std::sqrt(ss_res / dof / sxx);
  const boost::math::students_t dist(dof);
  const double tq = boost::math::quantile(dist, 0.975);
  fit.slope_ci_lo = fit.slope - tq * fit.slope_se;
  fit.slope_ci_hi = fit.slope + tq * fit.slope_se;
  return fit;
}

RateFit rate_fit_windowed(std::span<const RatePoint> points, double threshold) {
  RateFit fit = rate_fit(points);
  if (fit.r_squared < threshold && points.size() >= 4) {
    fit = rate_fit(points.subspan(1));
    fit.dropped = 1;
  }
  return fit;
}

std::string to_string(GridPolicy policy) {
  return policy == GridPolicy::uniform_augmented ? "uniform-augmented" : "user";
}

const ErrorEstimate& SweepResult::at(std::int64_t n, double p) const {
  for (const auto& e : estimates) {
    if (e.n == n && e.p == p) return e;
  }
  throw std::out_of_range("sweep result: no estimate for the requested (n, p)");
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_common(const SweepConfig& config) {
  if (config.replications < 2) throw std::invalid_argument("sweep: need at least 2 replications");
  if (config.p_list.empty()) throw std::invalid_argument("sweep: p list is empty");
  for (double p : config.p_list) {
    if (!(p >= 1.0)) throw std::invalid_argument("sweep: p must be >= 1");
  }
  if (config.master_ratio < kMinReferenceRatio) {
    throw std::invalid_argument("sweep: master ratio must be at least 64");
  }
}

std::vector<std::int64_t> checked_n_list(const SweepConfig& config) {
  auto ns = config.n_list;
  if (ns.empty()) throw std::invalid_argument("sweep: n list is empty");
  for (auto n : ns) {
    if (n < 1) throw std::invalid_argument("sweep: n values must be positive");
  }
  if (!std::is_sorted(ns.begin(), ns.end()) || std::adjacent_find(ns.begin(), ns.end()) != ns.end()) {
    throw std::invalid_argument("sweep: n values must be strictly increasing");
  }
  return ns;
}

SweepResult summarize(const std::vector<std::int64_t>& ns, const std::vector<std::vector<double>>& errors,
                      const SweepConfig& config) {
  SweepResult result;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    std::vector<double> valid;
    valid.reserve(errors[i].size());
    for (double e : errors[i]) {
      if (!std::isnan(e)) valid.push_back(e);
    }
    const auto breaches = static_cast<std::int64_t>(errors[i].size() - valid.size());
    for (double p : config.p_list) {
      ErrorEstimate est;
      if (valid.size() >= 2) {
        est = estimate_lp(valid, p, config.batches);
      } else {
        est.p = p;
        est.mean_error = kNaN;
        est.std_error = kNaN;
        est.replications = static_cast<std::int64_t>(valid.size());
      }
      est.n = ns[i];
      est.range_breaches = breaches;
      result.estimates.push_back(est);
    }
  }
  if (ns.size() >= 3) {
    for (double p : config.p_list) {
      std::vector<RatePoint> pts;
      bool usable = true;
      for (auto n : ns) {
        const double e = result.at(n, p).mean_error;
        usable = usable && e > 0.0 && std::isfinite(e);
        pts.push_back({static_cast<double>(n), e});
      }
      if (usable) {
        result.fits.push_back(rate_fit_windowed(pts));
        result.fit_p.push_back(p);
      }
    }
  }
  return result;
}

}  // namespace

SweepResult scheme_error_sweep(const DriftModel& model, SchemeKind scheme, const SweepConfig& config) {
  check_common(config);
  const auto ns = checked_n_list(config);
  if (scheme == SchemeKind::reference_euler) {
    throw std::invalid_argument("scheme_error_sweep: the reference is not a scheme under study");
  }
  const std::int64_t n_max = ns.back();
  const std::int64_t master_n = config.master_n > 0 ? config.master_n : config.master_ratio * n_max;
  if (master_n % config.master_ratio != 0) {
    throw std::invalid_argument("scheme_error_sweep: master_n must be a multiple of the master ratio");
  }
  const std::int64_t base = master_n / config.master_ratio;
  for (auto n : ns) {
    if (base % n != 0) {
      throw std::invalid_argument("scheme_error_sweep: every n must divide master_n / master_ratio");
    }
  }

  const bool milstein = scheme == SchemeKind::milstein_transformed;
  std::optional<TransformTable> table;
  double y0 = 0.0;
  if (milstein) {
    table.emplace(build_transform(model, default_working_interval(config.x0, config.half_width),
                                  config.transform));
    y0 = table->forward(config.x0);
  }

  const auto reps = config.replications;
  std::vector<std::vector<double>> errors(ns.size(), std::vector<double>(static_cast<std::size_t>(reps)));
  std::vector<char> breached(static_cast<std::size_t>(reps), 0);

  parallel_for(
      reps, config.threads,
      [&](std::int64_t r) {
        const auto ri = static_cast<std::size_t>(r);
        const StreamKey key{config.seed, static_cast<std::uint32_t>(r), roles::brownian, 0};
        const auto w = sample_brownian(master_n, key);
        if (!milstein) {
          const double ref = reference_solution(model, config.x0, w, base).endpoint;
          for (std::size_t i = 0; i < ns.size(); ++i) {
            errors[i][ri] = std::fabs(ref - euler(model, config.x0, w, ns[i]).endpoint);
          }
          return;
        }
        const auto ref = reference_solution(model, config.x0, w, base, true);
        std::vector<double> yref(ref.trajectory.size());
        try {
          for (std::size_t k = 0; k < yref.size(); ++k) yref[k] = table->forward(ref.trajectory[k]);
        } catch (const std::out_of_range&) {
          breached[ri] = 1;
          for (auto& row : errors) row[ri] = kNaN;
          return;
        }
        for (std::size_t i = 0; i < ns.size(); ++i) {
          const auto run = milstein_transformed(*table, y0, w, ns[i], {.store_trajectory = true});
          if (run.range_breaches != 0) {
            errors[i][ri] = kNaN;
            continue;
          }
          double sup = 0.0;
          for (std::size_t k = 0; k < yref.size(); ++k) sup = std::max(sup, std::fabs(run.trajectory[k] - yref[k]));
          errors[i][ri] = sup;
        }
      },
      config.progress);

  SweepResult result = summarize(ns, errors, config);
  result.master_n = master_n;
  result.range_breaches = std::count(breached.begin(), breached.end(), 1);
  if (table) result.transform_interp_error = table->interpolation_error();
  return result;
}

SweepResult coupling_gap_sweep(const DriftModel& model, const SweepConfig& config) {
  check_common(config);
  std::vector<TimeGrid> grids;
  std::vector<std::int64_t> ns;
  if (config.grid_policy == GridPolicy::uniform_augmented) {
    ns = checked_n_list(config);
    for (auto n : ns) grids.push_back(make_augmented_grid(static_cast<int>(n)));
  } else {
    grids = config.user_grids;
    if (grids.empty()) throw std::invalid_argument("coupling_gap_sweep: no user grids given");
    for (const auto& g : grids) ns.push_back(static_cast<std::int64_t>(g.size()));
    for (std::size_t i = 1; i < ns.size(); ++i) {
      if (ns[i] <= ns[i - 1]) {
        throw std::invalid_argument("coupling_gap_sweep: user grids must have increasing sizes");
      }
    }
  }
  const std::int64_t n_max = ns.back();
  const std::int64_t master_n = config.master_n > 0 ? config.master_n : config.master_ratio * n_max;
  std::vector<std::vector<std::int64_t>> indices;
  for (const auto& g : grids) indices.push_back(nesting_indices(g, master_n));

  const auto reps = config.replications;
  std::vector<std::vector<double>> errors(ns.size(), std::vector<double>(static_cast<std::size_t>(reps)));
  parallel_for(
      reps, config.threads,
      [&](std::int64_t r) {
        const auto ri = static_cast<std::size_t>(r);
        const StreamKey key{config.seed, static_cast<std::uint32_t>(r), roles::brownian, 0};
        const auto w = sample_brownian(master_n, key);
        const double x1 = reference_solution(model, config.x0, w, n_max).endpoint;
        std::vector<double> wt(w.size());
        for (std::size_t i = 0; i < grids.size(); ++i) {
          std::copy(w.begin(), w.end(), wt.begin());
          const auto tag = config.grid_policy == GridPolicy::uniform_augmented
                               ? static_cast<std::uint32_t>(ns[i])
                               : static_cast<std::uint32_t>(i);
          couple_bridges(wt, indices[i], {config.seed, static_cast<std::uint32_t>(r), roles::bridge_base, tag});
          errors[i][ri] = std::fabs(x1 - reference_solution(model, config.x0, wt, n_max).endpoint);
        }
      },
      config.progress);

  SweepResult result = summarize(ns, errors, config);
  result.master_n = master_n;
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result, const Metadata& metadata,
                     std::uint64_t seed) {
  write_metadata(out, metadata);
  out << "n,p,mean_error,std_error,M,breaches,seed\n";
  for (const auto& e : result.estimates) {
    out << e.n << ',' << format_number(e.p) << ',' << format_number(e.mean_error) << ','
        << format_number(e.std_error) << ',' << e.replications << ',' << e.range_breaches << ','
        << seed << '\n';
  }
}

}  // namespace driftlab
