#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dchlab/density.hpp"

namespace dchlab {

struct TrajectoryRecord;

/// Particle positions at mass levels (k + 1/2) / m on the universal cover,
/// non-decreasing, with total span below one.
struct QuantileRepr {
  std::vector<double> positions;
  std::size_t m() const { return positions.size(); }
};

/// Lifted CDF and quantile function of a grid density.
///
/// The CDF is piecewise linear between cell boundaries and extended by
/// F(x + 1) = F(x) + 1. The quantile takes the left end of flat pieces.
class QuantileFunction {
 public:
  explicit QuantileFunction(const DensityField& f);

  /// Lifted CDF F(x) for any real x; F(0) = 0.
  double cdf(double x) const;
  /// Lifted quantile X(s) for any real s; X(s + 1) = X(s) + 1.
  double operator()(double s) const;

 private:
  std::vector<double> values_;
  std::vector<double> cum_;
  double h_;
};

/// Quantiles at levels (k + 1/2) / m, positions in [0, 1).
QuantileRepr to_quantiles(const DensityField& f, std::size_t m);

/// Cell masses of the piecewise linear lifted CDF through the knots
/// (X_k, (k + 1/2) / m). Exact unit mass.
DensityField to_density(const QuantileRepr& q, std::size_t n);

/// Distance on the unit circle.
inline double dist_torus(double a, double b) {
  double d = a - b;
  d -= std::nearbyint(d);
  return d < 0.0 ? -d : d;
}

struct W2Detail {
  double distance = 0.0;
  /// Optimal mass offset in [0, 1).
  double theta = 0.0;
  std::size_t evaluations = 0;
};

/// Periodic W2 distance by minimisation over the mass offset theta of
/// J(theta) = int_0^1 dist_T(X_mu(s), X_nu(s + theta))^2 ds.
///
/// With m = 0 the integral is evaluated exactly (both quantile functions are
/// piecewise linear), which makes the distance symmetric up to rounding.
/// With m > 0 it is replaced by the midpoint sum over levels (k + 1/2) / m.
W2Detail w2_periodic_detail(const DensityField& mu, const DensityField& nu, std::size_t m = 0);
double w2_periodic(const DensityField& mu, const DensityField& nu, std::size_t m = 0);

/// Offset objective J(theta) with the same conventions; exposed for the
/// unimodality scans.
double w2_offset_objective(const DensityField& mu, const DensityField& nu, double theta, std::size_t m = 0);

/// Distance between two equal-size particle sets, minimised over cyclic
/// relabellings.
double w2_particles(const QuantileRepr& a, const QuantileRepr& b);

/// Displacement interpolation (1 - t) X_mu + t X_nu along the optimal
/// quantile coupling, reconstructed on the grid of mu.
DensityField geodesic(const DensityField& mu, const DensityField& nu, double t, std::size_t m = 0);

/// The field x -> f(x - s), computed exactly from the lifted CDF.
DensityField translate(const DensityField& f, double s);

/// d2(snap_k, snap_{k+1}) / (t_{k+1} - t_k).
double metric_speed(const TrajectoryRecord& traj, std::size_t k, std::size_t m = 0);

}  // namespace dchlab
