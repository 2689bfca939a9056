#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "dchlab/density.hpp"
#include "dchlab/potential.hpp"
#include "dchlab/trajectory.hpp"

namespace dchlab {

enum class PositivityMode { ClipRenormalize, RejectHalve };

std::string to_string(PositivityMode mode);
PositivityMode positivity_mode_from_string(const std::string& s);

struct SolverConfig {
  std::size_t n = 256;
  double dt = 1e-5;
  /// Zero for the limit solver.
  double eps = 0.0;
  double t_end = 0.1;
  /// 1 is backward Euler, 0.5 Crank-Nicolson.
  double theta_scheme = 1.0;
  int max_newton = 50;
  double newton_tol = 1e-10;
  PositivityMode positivity_mode = PositivityMode::ClipRenormalize;
  /// Smallest step before a run aborts.
  double dt_min = 1e-14;
  /// Relative energy-increase tolerance that triggers a retry.
  double energy_slack = 1e-8;
  /// Snapshot times in (0, t_end]; empty selects t_end only. t = 0 is always
  /// recorded.
  std::vector<double> output_times;
  /// Quantile count for metric speeds; 0 integrates exactly.
  std::size_t speed_m = 0;
  bool record_speeds = true;
  /// Energy check uses the largest of |E(0)| and this floor.
  double energy_scale_floor = 1e-12;

  void validate() const;
};

/// Outcome of a single step; `clipped` reports the negative mass removed.
struct StepInfo {
  int newton_iterations = 0;
  double residual = 0.0;
  double clipped_mass = 0.0;
};

/// One theta-scheme step of the degenerate fourth-order equation with
/// Newton's method. Throws StepFailure when Newton does not converge or when
/// reject-halve mode meets a negative cell.
DensityField step_eps(const DensityField& f, const SolverConfig& cfg, const PotentialSpec& spec,
                      StepInfo* info = nullptr);

/// Runs step_eps to cfg.t_end with adaptive step halving. A run that needs a
/// step below dt_min returns the partial trajectory with aborted = true.
TrajectoryRecord simulate_eps(const DensityField& f0, const SolverConfig& cfg, const PotentialSpec& spec);
TrajectoryRecord simulate_eps(const DensityField& f0, const SolverConfig& cfg, const PotentialSpec& spec,
                              const ConvexEnvelope& env);

/// Backward Euler step of the limit equation u - dt Lap Q**'(u) = f with
/// damped Newton.
DensityField step_limit(const DensityField& f, const SolverConfig& cfg, const ConvexEnvelope& env,
                        StepInfo* info = nullptr);

TrajectoryRecord simulate_limit(const DensityField& f0, const SolverConfig& cfg, const ConvexEnvelope& env);

/// Step size below which step_limit keeps densities non-negative. The
/// implicit scheme is monotone, so the bound is infinite.
double limit_positivity_dt_bound(const DensityField& f, const ConvexEnvelope& env);

/// Output times resolved against t_end: sorted, de-duplicated, in (0, t_end].
std::vector<double> resolve_output_times(const SolverConfig& cfg);

}  // namespace dchlab
