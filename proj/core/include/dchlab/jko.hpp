#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dchlab/density.hpp"
#include "dchlab/errors.hpp"
#include "dchlab/potential.hpp"
#include "dchlab/trajectory.hpp"
#include "dchlab/wasserstein.hpp"

namespace dchlab {

/// Newton uses the exact banded Hessian of the step objective; lbfgs is the
/// matrix-free fallback.
enum class JkoInnerSolver { Newton, Lbfgs };
std::string to_string(JkoInnerSolver s);
JkoInnerSolver jko_inner_solver_from_string(const std::string& s);

struct JkoConfig {
  double tau = 1e-3;
  /// Number of equal-mass particles.
  std::size_t m = 512;
  /// Stop when max_i |(X_i - Y_i) + s m dE/dX_i| drops below this length.
  double inner_tol = 1e-9;
  int inner_max = 5000;
  /// Gaussian reconstruction width; 0 selects 2 / m.
  double reconstruct_bandwidth = 0.0;
  /// Reconstruction grid; 0 keeps the grid of the input field.
  std::size_t n = 0;
  double min_separation = 1e-10;
  int lbfgs_memory = 12;
  JkoInnerSolver inner_solver = JkoInnerSolver::Newton;
  /// Kernel truncation radius in bandwidths.
  double kernel_cutoff = 8.0;

  double bandwidth() const { return reconstruct_bandwidth > 0.0 ? reconstruct_bandwidth : 2.0 / static_cast<double>(m); }
  void validate() const;
};

/// Density on n cells of equal-mass particles smoothed by a truncated
/// Gaussian of width `bandwidth`, integrated exactly over each cell. The
/// result has unit mass up to rounding and is non-negative.
DensityField reconstruct_density(const QuantileRepr& x, std::size_t n, double bandwidth, double cutoff = 8.0);

/// Chain rule through reconstruct_density: given dE/df_j (per cell, not
/// divided by h) returns dE/dX_i.
std::vector<double> reconstruct_pullback(const QuantileRepr& x, std::size_t n, double bandwidth,
                                         const std::vector<double>& de_df, double cutoff = 8.0);

/// Minimiser of (1/m) sum (X_i - Y_i)^2 + 2 s E^eps(reconstruct(X)) found by
/// projected Newton (or L-BFGS) with backtracking, started from X = Y.
struct JkoStepResult {
  QuantileRepr particles;
  DensityField density;
  double objective = 0.0;
  /// Objective at X = Y.
  double initial_objective = 0.0;
  double energy = 0.0;
  double initial_energy = 0.0;
  /// (1/m) sum (X_i - Y_i)^2.
  double transport_cost = 0.0;
  int iterations = 0;
  double residual = 0.0;
  std::size_t separation_hits = 0;
  bool converged = false;
};

/// Raised when the inner solver stops above inner_tol. Carries the best
/// iterate, whose objective never exceeds the starting one.
class JkoConvergenceFailure : public StepFailure {
 public:
  JkoConvergenceFailure(const std::string& what, JkoStepResult best) : StepFailure(what), best_(std::move(best)) {}
  const JkoStepResult& best() const { return best_; }

 private:
  JkoStepResult best_;
};

JkoStepResult jko_minimize(const QuantileRepr& prev, double step, std::size_t n, const JkoConfig& cfg, double eps,
                           const PotentialSpec& spec);

/// One minimizing-movement step of length cfg.tau from the quantiles of f.
DensityField jko_step(const DensityField& f, const JkoConfig& cfg, double eps, const PotentialSpec& spec);

/// The same minimisation with step s in (0, tau].
DensityField de_giorgi_interpolant(const DensityField& f_prev, double s, const JkoConfig& cfg, double eps,
                                   const PotentialSpec& spec);

struct JkoLedgerRow {
  std::size_t step = 0;
  double t = 0.0;
  double d2_increment = 0.0;
  double energy = 0.0;
  /// E(0) - E(n) - sum_k d2_k^2 / (2 tau_k); non-negative by construction.
  double slack = 0.0;
  /// slack minus sum_k (tau_k / 2) slope_eps(mu_k)^2.
  double slack_with_slope = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

struct JkoRun {
  TrajectoryRecord trajectory;
  std::vector<JkoLedgerRow> ledger;
  QuantileRepr final_particles;
};

/// Iterates the scheme from the quantiles of f0, carrying particles between
/// steps. Snapshots are the reconstructed densities at every step; speeds
/// are the step transport distances over tau.
JkoRun simulate_jko(const DensityField& f0, const JkoConfig& cfg, double eps, const PotentialSpec& spec,
                    double t_end);

void write_ledger_csv(const std::vector<JkoLedgerRow>& ledger, const std::string& path);

}  // namespace dchlab
