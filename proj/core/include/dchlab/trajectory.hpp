#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dchlab/density.hpp"
#include "dchlab/functionals.hpp"

namespace dchlab {

struct TrajectoryEvent {
  double t = 0.0;
  /// "dt-halved", "dt-restored", "clip", "energy-reject", "separation-floor", "abort", ...
  std::string kind;
  std::string detail;
};

/// Summary statistics of one snapshot.
struct SnapshotStats {
  double min = 0.0;
  double max = 0.0;
  double mass = 0.0;
};

/// Time-stamped snapshots of a curve of densities.
///
/// speeds[k] is the discrete metric speed on (t_{k-1}, t_k); speeds[0] = 0.
/// Trajectories read back from CSV carry stats, reports and speeds but no
/// snapshots.
struct TrajectoryRecord {
  /// "eps", "limit", "jko" or "nonlocal". Selects which energy the audit
  /// uses: e_star / slope_star for "limit", e_eps / slope_eps otherwise.
  std::string flow = "eps";
  std::vector<double> times;
  std::vector<DensityField> snapshots;
  std::vector<SnapshotStats> stats;
  std::vector<EnergyReport> reports;
  std::vector<double> speeds;
  std::vector<TrajectoryEvent> events;
  bool aborted = false;
  std::string abort_reason;

  std::size_t size() const { return times.size(); }

  /// Appends a snapshot with its report. The speed entry is left at zero;
  /// see compute_speeds().
  void append(double t, DensityField f, const EnergyReport& report);

  void log(double t, std::string kind, std::string detail = {});

  /// Fills speeds from consecutive snapshots using w2_periodic with m
  /// quantiles (0 selects 4 n).
  void compute_speeds(std::size_t m = 0);

  /// Energy and slope columns used by the dissipation audit.
  double audit_energy(std::size_t k) const;
  double audit_slope(std::size_t k) const;
};

/// CSV with a leading "# flow=<name>" line and the columns
/// t,min,max,mass,e_eps,e_star,slope_eps,slope_star,gap,speed.
void write_trajectory_csv(const TrajectoryRecord& traj, std::ostream& os);
void write_trajectory_csv(const TrajectoryRecord& traj, const std::string& path);
TrajectoryRecord read_trajectory_csv(std::istream& is);
TrajectoryRecord read_trajectory_csv(const std::string& path);

/// Writes one JSON document per selected snapshot: {"t": .., "values": [..]}.
void write_snapshots_json(const TrajectoryRecord& traj, const std::string& path);

}  // namespace dchlab
