#include "driftlab/transform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace driftlab {

namespace {

double simpson(const double* f, std::size_t intervals, double h) {
  // `intervals` is even; f holds intervals + 1 samples.
  double acc = 0.0;
  for (std::size_t k = 0; k + 2 <= intervals; k += 2) acc += f[k] + 4.0 * f[k + 1] + f[k + 2];
  return acc * h / 3.0;
}

}  // namespace

Interval default_working_interval(double x0, double half_width) {
  if (!(half_width > 0.0) || !std::isfinite(x0)) {
    throw std::invalid_argument("working interval: need finite x0 and positive half width");
  }
  return {std::min(x0 - half_width, 0.0), std::max(x0 + half_width, 0.0)};
}

TransformTable build_transform(const DriftModel& model, Interval interval,
                               const TransformOptions& options) {
  if (!(interval.lo <= 0.0 && interval.hi >= 0.0 && interval.lo < interval.hi) ||
      !std::isfinite(interval.lo) || !std::isfinite(interval.hi)) {
    throw std::invalid_argument("build_transform: working interval must contain 0");
  }
  if (options.nodes < 64) throw std::invalid_argument("build_transform: need at least 64 nodes");
  if (options.panels < 2 || options.panels % 2 != 0) {
    throw std::invalid_argument("build_transform: panels must be even and >= 2");
  }

  TransformTable table;
  table.model_ = model;
  const int intervals = options.nodes - 1;
  int left = 0;
  if (interval.hi == 0.0) {
    left = intervals;
  } else if (interval.lo < 0.0) {
    left = static_cast<int>(std::lround(intervals * (-interval.lo) / interval.width()));
    left = std::clamp(left, 1, intervals - 1);
  }
  const int right = intervals - left;
  table.step_left_ = left > 0 ? -interval.lo / left : 0.0;
  table.step_right_ = right > 0 ? interval.hi / right : 0.0;
  table.zero_index_ = static_cast<std::size_t>(left);

  auto& x = table.nodes_;
  x.resize(static_cast<std::size_t>(options.nodes));
  for (int i = 0; i < left; ++i) x[static_cast<std::size_t>(i)] = -(left - i) * table.step_left_;
  x[static_cast<std::size_t>(left)] = 0.0;
  for (int i = 1; i <= right; ++i) x[static_cast<std::size_t>(left + i)] = i * table.step_right_;
  x.front() = interval.lo;
  x.back() = interval.hi;

  // Refined grid: 2 * panels sub-intervals per node interval.
  const std::size_t sub = 2 * static_cast<std::size_t>(options.panels);
  const std::size_t nref = static_cast<std::size_t>(intervals) * sub + 1;
  std::vector<double> xr(nref);
  for (std::size_t i = 0; i < static_cast<std::size_t>(intervals); ++i) {
    const double h = (x[i + 1] - x[i]) / static_cast<double>(sub);
    for (std::size_t k = 0; k < sub; ++k) xr[i * sub + k] = x[i] + static_cast<double>(k) * h;
  }
  xr.back() = x.back();
  const std::size_t zr = table.zero_index_ * sub;

  std::vector<double> tr(nref);
  if (options.inner == InnerRule::closed_form) {
    for (std::size_t k = 0; k < nref; ++k) tr[k] = model.primitive(xr[k]);
  } else {
    std::vector<double> mu(nref);
    for (std::size_t k = 0; k < nref; ++k) mu[k] = model(xr[k]);
    auto piece = [&](std::size_t a) {
      const double h = xr[a + 1] - xr[a];
      return h / 6.0 * (mu[a] + 4.0 * model(0.5 * (xr[a] + xr[a + 1])) + mu[a + 1]);
    };
    tr[zr] = 0.0;
    for (std::size_t k = zr; k + 1 < nref; ++k) tr[k + 1] = tr[k] + piece(k);
    for (std::size_t k = zr; k > 0; --k) tr[k - 1] = tr[k] - piece(k - 1);
  }

  std::vector<double> fr(nref);
  double max_t = 0.0;
  for (std::size_t k = 0; k < nref; ++k) {
    fr[k] = std::exp(-2.0 * tr[k]);
    max_t = std::max(max_t, std::fabs(tr[k]));
  }
  const double href = std::max(table.step_left_, table.step_right_) / static_cast<double>(sub);
  table.sup_t_ = max_t + model.sup_bound() * 0.5 * href;
  table.c1_ = std::exp(-2.0 * table.sup_t_);
  table.c2_ = std::exp(2.0 * table.sup_t_);

  const std::size_t n = x.size();
  table.t_.resize(n);
  table.g_.resize(n);
  for (std::size_t i = 0; i < n; ++i) table.t_[i] = tr[i * sub];
  table.g_[table.zero_index_] = 0.0;
  auto increment = [&](std::size_t i) {
    return simpson(&fr[i * sub], sub, (x[i + 1] - x[i]) / static_cast<double>(sub));
  };
  for (std::size_t i = table.zero_index_; i + 1 < n; ++i) table.g_[i + 1] = table.g_[i] + increment(i);
  for (std::size_t i = table.zero_index_; i > 0; --i) table.g_[i - 1] = table.g_[i] - increment(i - 1);

  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(table.g_[i + 1] > table.g_[i])) {
      throw std::runtime_error("build_transform: tabulated G is not strictly increasing");
    }
  }
  table.finalize();

  // Midpoint self-check against G integrated on the refined grid; half is
  // even because panels is.
  const std::size_t half = sub / 2;
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = (x[i + 1] - x[i]) / static_cast<double>(sub);
    const double gmid = table.g_[i] + simpson(&fr[i * sub], half, h);
    err = std::max(err, std::fabs(table.hermite(i, xr[i * sub + half]) - gmid));
  }
  table.interp_error_ = err;
  return table;
}

void TransformTable::finalize() {
  const std::size_t n = nodes_.size();
  slopes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) slopes_[i] = std::exp(-2.0 * t_[i]);
  // Fritsch-Carlson limiter keeps the interpolant monotone.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double secant = (g_[i + 1] - g_[i]) / (nodes_[i + 1] - nodes_[i]);
    const double a = slopes_[i] / secant;
    const double b = slopes_[i + 1] / secant;
    const double r2 = a * a + b * b;
    if (r2 > 9.0) {
      const double tau = 3.0 / std::sqrt(r2);
      slopes_[i] = tau * a * secant;
      slopes_[i + 1] = tau * b * secant;
    }
  }
}

std::size_t TransformTable::locate_x(double x) const {
  const std::size_t last = nodes_.size() - 2;
  double guess = 0.0;
  if (x < 0.0) {
    guess = static_cast<double>(zero_index_) - std::ceil(-x / step_left_);
  } else {
    guess = step_right_ > 0.0 ? static_cast<double>(zero_index_) + std::floor(x / step_right_)
                              : static_cast<double>(last);
  }
  auto i = static_cast<std::size_t>(std::clamp(guess, 0.0, static_cast<double>(last)));
  while (i > 0 && nodes_[i] > x) --i;
  while (i < last && nodes_[i + 1] <= x) ++i;
  return i;
}

double TransformTable::hermite(std::size_t i, double x) const {
  const double h = nodes_[i + 1] - nodes_[i];
  const double s = (x - nodes_[i]) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * g_[i] + h * h10 * slopes_[i] + h01 * g_[i + 1] + h * h11 * slopes_[i + 1];
}

double TransformTable::forward(double x) const {
  if (!(x >= nodes_.front() && x <= nodes_.back())) {
    throw std::out_of_range("transform: x outside the working interval");
  }
  return hermite(locate_x(x), x);
}

double TransformTable::inverse(double y) const {
  if (!(y >= g_.front() && y <= g_.back())) {
    throw std::out_of_range("transform: y outside the tabulated image");
  }
  auto it = std::upper_bound(g_.begin(), g_.end(), y);
  std::size_t i = static_cast<std::size_t>(std::distance(g_.begin(), it));
  i = std::clamp<std::size_t>(i, 1, g_.size() - 1) - 1;
  if (y == g_[i]) return nodes_[i];
  if (y == g_[i + 1]) return nodes_[i + 1];

  double a = nodes_[i];
  double b = nodes_[i + 1];
  const double h = b - a;
  double x = a + h * (y - g_[i]) / (g_[i + 1] - g_[i]);
  for (int iter = 0; iter < 100; ++iter) {
    const double r = hermite(i, x) - y;
    if (r == 0.0) return x;
    if (r > 0.0) b = x; else a = x;
    // Derivative of the Hermite cubic.
    const double s = (x - nodes_[i]) / h;
    const double d = (6.0 * s * s - 6.0 * s) * (g_[i] - g_[i + 1]) / h +
                     (3.0 * s * s - 4.0 * s + 1.0) * slopes_[i] + (3.0 * s * s - 2.0 * s) * slopes_[i + 1];
    double next = d > 0.0 ? x - r / d : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (next == x || b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::fabs(x)) return next;
    x = next;
  }
  return x;
}

double TransformTable::derivative(double x) const {
  if (!(x >= nodes_.front() && x <= nodes_.back())) {
    throw std::out_of_range("transform: x outside the working interval");
  }
  return std::exp(-2.0 * model_.primitive(x));
}

DiffusionSample TransformTable::diffusion(double y) const {
  const double x = inverse(y);
  const DriftSample s = model_.sample(x);
  return {x, std::exp(-2.0 * s.primitive), -2.0 * s.value};
}

double TransformTable::diffusion_b(double y) const { return diffusion(y).b; }

double TransformTable::diffusion_b_prime(double y) const { return -2.0 * model_(inverse(y)); }

void TransformTable::write_csv(std::ostream& out) const {
  out << "x,T,G\n";
  char line[96];
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", nodes_[i], t_[i], g_[i]);
    out << line;
  }
}

TransformTable TransformTable::read_csv(std::istream& in, DriftModel model) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("x,T,G", 0) != 0) {
    throw std::runtime_error("transform csv: missing x,T,G header");
  }
  TransformTable table;
  table.model_ = std::move(model);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    double v[3];
    char comma = 0;
    if (!(row >> v[0] >> comma >> v[1] >> comma >> v[2])) {
      throw std::runtime_error("transform csv: malformed row: " + line);
    }
    table.nodes_.push_back(v[0]);
    table.t_.push_back(v[1]);
    table.g_.push_back(v[2]);
  }
  const std::size_t n = table.nodes_.size();
  if (n < 2) throw std::runtime_error("transform csv: need at least two rows");
  auto zero = std::find(table.nodes_.begin(), table.nodes_.end(), 0.0);
  if (zero == table.nodes_.end()) throw std::runtime_error("transform csv: 0 is not a node");
  table.zero_index_ = static_cast<std::size_t>(std::distance(table.nodes_.begin(), zero));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(table.nodes_[i + 1] > table.nodes_[i]) || !(table.g_[i + 1] > table.g_[i])) {
      throw std::runtime_error("transform csv: nodes and G must be strictly increasing");
    }
  }
  const auto zi = table.zero_index_;
  table.step_left_ = zi > 0 ? -table.nodes_.front() / static_cast<double>(zi) : 0.0;
  table.step_right_ = zi + 1 < n ? table.nodes_.back() / static_cast<double>(n - 1 - zi) : 0.0;
  double max_t = 0.0;
  double max_h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_t = std::max(max_t, std::fabs(table.t_[i]));
    if (i + 1 < n) max_h = std::max(max_h, table.nodes_[i + 1] - table.nodes_[i]);
  }
  table.sup_t_ = max_t + table.model_.sup_bound() * 0.5 * max_h;
  table.c1_ = std::exp(-2.0 * table.sup_t_);
  table.c2_ = std::exp(2.0 * table.sup_t_);
  table.interp_error_ = std::numeric_limits<double>::quiet_NaN();
  table.finalize();
  return table;
}

}  // namespace driftlab
