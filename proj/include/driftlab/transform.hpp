#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "driftlab/drift_models.hpp"

namespace driftlab {

/// How T(x) = int_0^x mu is obtained at the quadrature points.
enum class InnerRule {
  closed_form,  ///< DriftModel::primitive
  simpson,      ///< composite Simpson on the refined node grid
};

struct TransformOptions {
  int nodes = 4096;
  /// Simpson panels per node interval for the outer integral of e^{-2T}.
  int panels = 8;
  InnerRule inner = InnerRule::closed_form;
};

/// x = G^{-1}(y) together with b(y) = e^{-2T(x)} and b'(y) = -2 mu(x).
struct DiffusionSample {
  double x = 0.0;
  double b = 0.0;
  double b_prime = 0.0;
};

/// Tabulated drift-removing transform G(x) = int_0^x exp(-2 T(y)) dy.
///
/// G is represented by a monotone cubic Hermite interpolant of its node
/// values, with nodal slopes G'(x_i) = exp(-2 T(x_i)). Queries outside the
/// working interval (or its image) throw std::out_of_range; the table never
/// extrapolates.
class TransformTable {
 public:
  const DriftModel& model() const noexcept { return model_; }
  Interval working_interval() const noexcept { return {nodes_.front(), nodes_.back()}; }
  Interval image() const noexcept { return {g_.front(), g_.back()}; }

  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& t_values() const noexcept { return t_; }
  const std::vector<double>& g_values() const noexcept { return g_; }
  std::size_t zero_index() const noexcept { return zero_index_; }

  /// Bound on sup |T| over the working interval, and the derived
  /// c1 = exp(-2 sup|T|) <= G' <= c2 = exp(2 sup|T|).
  double sup_abs_t() const noexcept { return sup_t_; }
  double c1() const noexcept { return c1_; }
  double c2() const noexcept { return c2_; }

  /// Largest deviation of the interpolant from independently integrated G
  /// at the interval midpoints.
  double interpolation_error() const noexcept { return interp_error_; }

  double forward(double x) const;
  double inverse(double y) const;
  /// G'(x) = exp(-2 T(x)), from the drift primitive.
  double derivative(double x) const;

  double diffusion_b(double y) const;
  double diffusion_b_prime(double y) const;
  DiffusionSample diffusion(double y) const;

  /// Columns x,T,G with a header line.
  void write_csv(std::ostream& out) const;
  /// Reads a table written by write_csv; the drift is needed for b and b'.
  static TransformTable read_csv(std::istream& in, DriftModel model);

 private:
  friend TransformTable build_transform(const DriftModel&, Interval, const TransformOptions&);
  TransformTable() = default;
  void finalize();
  std::size_t locate_x(double x) const;
  double hermite(std::size_t i, double x) const;

  DriftModel model_ = DriftModel::zero();
  std::vector<double> nodes_;
  std::vector<double> t_;
  std::vector<double> g_;
  std::vector<double> slopes_;  // limited Hermite slopes
  std::size_t zero_index_ = 0;
  double sup_t_ = 0.0;
  double c1_ = 1.0;
  double c2_ = 1.0;
  double interp_error_ = 0.0;
  // Nodes are uniform on [lo, 0] and on [0, hi].
  double step_left_ = 0.0;
  double step_right_ = 0.0;
};

/// Builds the table on `interval`, which must contain 0 in its interior or
/// as an endpoint. Throws std::invalid_argument for bad arguments and
/// std::runtime_error if the tabulated G fails to be strictly increasing.
TransformTable build_transform(const DriftModel& model, Interval interval,
                               const TransformOptions& options = {});

/// [x0 - half_width, x0 + half_width] widened to contain 0.
Interval default_working_interval(double x0, double half_width = 8.0);

}  // namespace driftlab
