#include "dchlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dchlab/errors.hpp"
#include "dchlab/functionals.hpp"
#include "dchlab/wasserstein.hpp"

namespace dchlab {

std::vector<double> oscillation_profile(const DensityField& f, double window) {
  const std::size_t n = f.size();
  const double h = f.spacing();
  if (!(window >= h * (1.0 - 1e-12))) throw InvalidInput("oscillation window must be at least one cell");
  const long r = static_cast<long>(std::floor(0.5 * window / h + 1e-12));
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double lo = f[j], hi = f[j];
    for (long k = -r; k <= r; ++k) {
      const double v = f.at(static_cast<long>(j) + k);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out[j] = hi - lo;
  }
  return out;
}

WrinkleReport wrinkling_report(const DensityField& f, const UnstableSet& sigma, double eta, double delta, double L) {
  if (!(eta > 0.0) || !(delta > 0.0)) throw InvalidInput("wrinkling_report needs eta > 0 and delta > 0");
  const std::size_t n = f.size();
  const double h = f.spacing();
  WrinkleReport rep;
  rep.eta = eta;
  rep.delta = delta;
  rep.L = L > 0.0 ? L : 4.0 * f.max() / delta;

  std::vector<double> vals(f.values().begin(), f.values().end());
  const auto slope = centered_difference(vals, h);
  std::vector<double> dist(n);
  for (std::size_t j = 0; j < n; ++j) dist[j] = distance_to_sigma(f[j], sigma);

  // Pairs with separation k h < delta.
  const long width = std::min<long>(static_cast<long>(std::ceil(delta / h)) - 1, static_cast<long>(n) - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(std::abs(slope[i]) < rep.L)) continue;
    double run_min = dist[i];
    for (long k = 1; k <= width; ++k) {
      const std::size_t j = wrap_index(static_cast<long>(i) + k, n);
      run_min = std::min(run_min, dist[j]);
      if (run_min < eta) break;
      if (!(std::abs(slope[j]) < rep.L)) continue;
      ++rep.pairs_checked;
      const double osc = std::abs(f[i] - f[j]);
      if (osc >= eta) {
        rep.violations.push_back({f.cell_center(i), f.cell_center(i) + static_cast<double>(k) * h, osc, run_min});
      }
    }
  }

  const auto prof = oscillation_profile(f, std::max(delta, h));
  const long r = static_cast<long>(std::floor(0.5 * std::max(delta, h) / h + 1e-12));
  double osc_mass = 0.0, off_mass = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (prof[j] < eta) continue;
    ++rep.oscillating_cells;
    osc_mass += f[j] * h;
    if (dist[j] > eta) off_mass += f[j] * h;
    double wmin = std::numeric_limits<double>::infinity();
    for (long k = -r; k <= r; ++k) wmin = std::min(wmin, dist[wrap_index(static_cast<long>(j) + k, n)]);
    if (!(wmin < eta)) rep.sigma_localized = false;
  }
  const double mass = f.mass();
  rep.oscillating_mass_fraction = osc_mass / mass;
  rep.oscillating_mass_off_sigma = off_mass / mass;
  return rep;
}

double h1_local(const DensityField& f, const std::vector<Interval>& regions) {
  const std::size_t n = f.size();
  const double h = f.spacing();
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double x = f.cell_center(j);
    const bool inside = std::any_of(regions.begin(), regions.end(), [x](const Interval& iv) { return iv.contains(x); });
    if (!inside) continue;
    const double d = (f[(j + 1) % n] - f[j]) / h;
    s += d * d * h;
  }
  return s;
}

std::vector<Interval> regions_away_from_sigma(const DensityField& f, const UnstableSet& sigma, double eta) {
  std::vector<Interval> out;
  const double h = f.spacing();
  bool open = false;
  for (std::size_t j = 0; j < f.size(); ++j) {
    const bool away = distance_to_sigma(f[j], sigma) > eta;
    const double lo = static_cast<double>(j) * h;
    if (away && !open) {
      out.push_back({lo, lo + h});
      open = true;
    } else if (away) {
      out.back().hi = lo + h;
    } else {
      open = false;
    }
  }
  return out;
}

AuditReport energy_dissipation_audit(const TrajectoryRecord& traj, double tol_rel) {
  const std::size_t k = traj.size();
  if (k < 2) throw InvalidInput("energy audit needs at least two snapshots");
  if (traj.reports.size() != k || traj.speeds.size() != k) throw InvalidInput("energy audit needs reports and speeds");
  AuditReport rep;
  rep.flow = traj.flow;
  rep.e0 = traj.audit_energy(0);
  rep.tolerance = tol_rel * std::abs(rep.e0);
  rep.min_residual = std::numeric_limits<double>::infinity();
  double slope_int = 0.0, speed_int = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (i > 0) {
      const double dt = traj.times[i] - traj.times[i - 1];
      const double s0 = traj.audit_slope(i - 1), s1 = traj.audit_slope(i);
      slope_int += 0.5 * dt * (s0 * s0 + s1 * s1);
      speed_int += dt * traj.speeds[i] * traj.speeds[i];
    }
    AuditRow row;
    row.t = traj.times[i];
    row.energy = traj.audit_energy(i);
    row.slope_integral = slope_int;
    row.speed_integral = speed_int;
    row.residual = rep.e0 - row.energy - 0.5 * slope_int - 0.5 * speed_int;
    rep.min_residual = std::min(rep.min_residual, row.residual);
    rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(row.residual));
    if (row.residual < -rep.tolerance) rep.passed = false;
    rep.rows.push_back(row);
  }
  return rep;
}

PreparednessReport well_preparedness(const std::vector<std::pair<double, DensityField>>& family,
                                     const DensityField& f0, const ConvexEnvelope& env, const PotentialSpec& spec,
                                     double d2_threshold, double gap_threshold) {
  PreparednessReport rep;
  const double e_star = energy_star(f0, env);
  for (std::size_t i = 0; i < family.size(); ++i) {
    const auto& [eps, fe] = family[i];
    if (i > 0 && !(eps < family[i - 1].first)) throw InvalidInput("well_preparedness needs decreasing eps");
    PreparednessRow row;
    row.eps = eps;
    row.d2 = w2_periodic(fe, f0);
    row.gap = energy_eps(fe, eps, spec) - e_star;
    // Family members may sit on finer grids than f0; differences far below
    // the thresholds are resolution noise.
    if (!rep.rows.empty()) {
      if (row.d2 > rep.rows.back().d2 + 1e-3 * d2_threshold) rep.d2_decreasing = false;
      if (row.gap > rep.rows.back().gap + 1e-3 * gap_threshold) rep.gap_decreasing = false;
    }
    rep.rows.push_back(row);
  }
  rep.well_prepared = !rep.rows.empty() && rep.d2_decreasing && rep.gap_decreasing &&
                      rep.rows.back().d2 <= d2_threshold && std::abs(rep.rows.back().gap) <= gap_threshold;
  return rep;
}

bool u_lambda_membership(double A, double B, double lambda, const PotentialSpec& spec) {
  if (A < 0.0 || B < 0.0) throw InvalidInput("u_lambda_membership needs A, B >= 0");
  return spec.eval_w(A) + spec.eval_w1(A) * (B - A) + lambda >= spec.eval_w(B);
}

DeltaCalibration calibrate_delta(const std::vector<DensityField>& fields, const UnstableSet& sigma, double eta,
                                 std::vector<double> candidates, double L) {
  std::sort(candidates.begin(), candidates.end());
  DeltaCalibration cal;
  cal.candidates = candidates;
  for (double d : candidates) {
    std::size_t count = 0;
    for (const auto& f : fields) count += wrinkling_report(f, sigma, eta, d, L).violations.size();
    cal.violation_counts.push_back(count);
    if (count == 0) cal.delta = d;
  }
  return cal;
}

std::vector<LscProxyRow> lsc_proxy(const std::vector<std::pair<double, DensityField>>& family,
                                   const DensityField& f0, const UnstableSet& sigma, double radius,
                                   double min_dist) {
  std::vector<LscProxyRow> out;
  for (const auto& [eps, fe] : family) {
    LscProxyRow row;
    row.eps = eps;
    std::size_t fails = 0;
    const double he = fe.spacing();
    for (std::size_t j = 0; j < f0.size(); ++j) {
      const double d0 = distance_to_sigma(f0[j], sigma);
      if (!(d0 > min_dist)) continue;
      ++row.sample_points;
      const double x = f0.cell_center(j);
      const long lo = static_cast<long>(std::ceil((x - radius) / he - 0.5));
      const long hi = static_cast<long>(std::floor((x + radius) / he - 0.5));
      double dmin = std::numeric_limits<double>::infinity();
      for (long i = lo; i <= hi; ++i) dmin = std::min(dmin, distance_to_sigma(fe.at(i), sigma));
      if (dmin <= 0.5 * d0) ++fails;
    }
    row.failing_fraction = row.sample_points ? static_cast<double>(fails) / static_cast<double>(row.sample_points) : 0.0;
    out.push_back(row);
  }
  return out;
}

}  // namespace dchlab
