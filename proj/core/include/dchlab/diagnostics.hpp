#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dchlab/density.hpp"
#include "dchlab/potential.hpp"
#include "dchlab/trajectory.hpp"

namespace dchlab {

/// A pair of points whose values differ by at least eta while every value
/// between them stays at distance at least eta from the unstable set.
struct WrinkleViolation {
  double x = 0.0;
  double y = 0.0;
  double osc = 0.0;
  double min_dist_to_sigma = 0.0;
};

struct WrinkleReport {
  double eta = 0.0;
  double delta = 0.0;
  double L = 0.0;
  std::vector<WrinkleViolation> violations;
  /// Mass of cells whose centred delta-window oscillates by at least eta.
  double oscillating_mass_fraction = 0.0;
  /// Part of that mass sitting in cells at distance > eta from the unstable set.
  double oscillating_mass_off_sigma = 0.0;
  /// Every oscillating window meets the eta-neighbourhood of the unstable set.
  bool sigma_localized = true;
  std::size_t pairs_checked = 0;
  std::size_t oscillating_cells = 0;
};

/// Scans grid pairs closer than delta with centred slopes below L at both
/// ends. L <= 0 selects 4 max(f) / delta.
WrinkleReport wrinkling_report(const DensityField& f, const UnstableSet& sigma, double eta, double delta,
                               double L = 0.0);

/// Per-cell max - min of f over the centred window of the given width.
std::vector<double> oscillation_profile(const DensityField& f, double window);

/// sum over cells with centre in one of the regions of ((f_{j+1} - f_j)/h)^2 h.
double h1_local(const DensityField& f, const std::vector<Interval>& regions);

/// Cells whose limit value stays at distance above eta from the unstable
/// set, merged into intervals of [0, 1).
std::vector<Interval> regions_away_from_sigma(const DensityField& f, const UnstableSet& sigma, double eta);

struct AuditRow {
  double t = 0.0;
  double energy = 0.0;
  double slope_integral = 0.0;
  double speed_integral = 0.0;
  double residual = 0.0;
};

struct AuditReport {
  std::string flow;
  double e0 = 0.0;
  std::vector<AuditRow> rows;
  double min_residual = 0.0;
  double max_abs_residual = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

/// residual(t) = E(0) - E(t) - (1/2) int slope^2 - (1/2) int speed^2, slope by
/// the trapezoid rule and speed piecewise constant per interval. Passes when
/// every residual is >= -tol_rel |E(0)|.
AuditReport energy_dissipation_audit(const TrajectoryRecord& traj, double tol_rel = 1e-3);

struct PreparednessRow {
  double eps = 0.0;
  double d2 = 0.0;
  double gap = 0.0;
};

struct PreparednessReport {
  std::vector<PreparednessRow> rows;
  bool d2_decreasing = true;
  bool gap_decreasing = true;
  bool well_prepared = false;
};

/// Rows (eps, d2(f_eps, f0), E^eps[f_eps] - E**[f0]) for a family sorted by
/// decreasing eps. Well prepared when both columns are non-increasing, up to
/// 1e-3 of the matching threshold, and the last entries are below the
/// thresholds.
PreparednessReport well_preparedness(const std::vector<std::pair<double, DensityField>>& family,
                                     const DensityField& f0, const ConvexEnvelope& env, const PotentialSpec& spec,
                                     double d2_threshold = 1e-2, double gap_threshold = 1e-3);

/// W(A) + W'(A) (B - A) + lambda >= W(B).
bool u_lambda_membership(double A, double B, double lambda, const PotentialSpec& spec);

struct DeltaCalibration {
  double delta = 0.0;
  std::vector<double> candidates;
  std::vector<std::size_t> violation_counts;
};

/// Largest candidate delta with zero wrinkling violations on every field.
DeltaCalibration calibrate_delta(const std::vector<DensityField>& fields, const UnstableSet& sigma, double eta,
                                 std::vector<double> candidates, double L = 0.0);

struct LscProxyRow {
  double eps = 0.0;
  std::size_t sample_points = 0;
  /// Fraction of sample points x with min_{|y - x| < radius} d(f(y), Sigma)
  /// <= d(f0(x), Sigma) / 2.
  double failing_fraction = 0.0;
};

/// Uniform lower-semicontinuity probe of x -> d(f(x), Sigma) along an eps
/// family at a fixed time. Sample points are the cells of f0 with
/// d(f0, Sigma) > min_dist.
std::vector<LscProxyRow> lsc_proxy(const std::vector<std::pair<double, DensityField>>& family,
                                   const DensityField& f0, const UnstableSet& sigma, double radius,
                                   double min_dist = 1e-3);

}  // namespace dchlab
