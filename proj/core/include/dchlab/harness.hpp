#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dchlab/diagnostics.hpp"
#include "dchlab/jko.hpp"
#include "dchlab/nonlocal.hpp"
#include "dchlab/potential.hpp"
#include "dchlab/solvers.hpp"

namespace dchlab {

struct DiagnosticsConfig {
  double eta = 0.05;
  double delta = 0.05;
  /// Slope bound for the pair scan; 0 selects 4 max(f) / delta.
  double L = 0.0;
  double audit_tol = 1e-3;
};

struct InitialDataSpec {
  std::string name = "uniform";
  nlohmann::json params = nlohmann::json::object();
};

/// One experiment, read from a single JSON document. Unknown keys are
/// rejected at every level.
struct ExperimentConfig {
  PotentialSpec potential;
  nlohmann::json potential_json;
  /// solver.n is the base grid; eps runs use max(n, ceil(8 / eps)) cells.
  SolverConfig solver;
  JkoConfig jko;
  std::vector<double> eps_list;
  InitialDataSpec initial;
  std::vector<double> output_times;
  std::uint64_t seed = 0;
  std::string output_dir = "dchlab-out";
  /// Worker threads for sweeps; 0 uses the hardware concurrency.
  unsigned threads = 0;
  /// Skip the well-preparedness gate in run_sweep.
  bool allow_ill_prepared = false;
  /// Step of the limit run in sweeps; 0 reuses solver.dt.
  double limit_dt = 0.0;
  DiagnosticsConfig diagnostics;
  /// Normalised document (defaults filled in) used for hashing.
  nlohmann::json document;

  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;
};

/// Potential from a name or {"name", "coefficients", "domain_max"}.
PotentialSpec potential_from_json(const nlohmann::json& j);

/// Built-in generators "uniform", "cosine", "bump" and "two-phase"; every
/// result is non-negative with unit mass. An optional "noise" parameter
/// multiplies by 1 + noise U(-1, 1) drawn from a generator seeded by seed.
DensityField generate_initial(const std::string& name, const nlohmann::json& params, std::size_t n,
                              std::uint64_t seed = 0);

/// `count` log-spaced times in [t_end / 1000, t_end].
std::vector<double> default_output_times(double t_end, std::size_t count = 20);

/// max(n_base, ceil(8 / eps)).
std::size_t grid_for_eps(std::size_t n_base, double eps);

struct SweepRow {
  double eps = 0.0;
  std::size_t n = 0;
  double sup_t_d2_to_limit = 0.0;
  /// Trapezoid quadrature of (slope_eps - slope_star(limit))^2 over output times.
  double slope_gap_L2 = 0.0;
  double energy_gap_max = 0.0;
  double energy_gap_final = 0.0;
  /// Fraction of output times with slope_eps >= slope_star - (0.1 slope_star + 1e-3).
  double lsc_pass_rate = 0.0;
  std::size_t wrinkle_violations = 0;
  double oscillating_mass_fraction = 0.0;
  bool aborted = false;
  std::string error;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  TrajectoryRecord limit;
  std::vector<TrajectoryRecord> runs;
  PreparednessReport preparedness;
  std::vector<std::string> outputs;
};

/// One limit run plus one eps run per entry of eps_list (in parallel).
/// Failures are recorded per row; the remaining rows are unaffected.
SweepReport run_sweep(const ExperimentConfig& cfg, bool persist = true);

enum class RunMode { Eps, Limit, Jko, Nonlocal };
RunMode run_mode_from_string(const std::string& s);
std::string to_string(RunMode mode);

struct SingleRunResult {
  TrajectoryRecord trajectory;
  AuditReport audit;
  WrinkleReport wrinkle;
  std::vector<JkoLedgerRow> ledger;
  /// (t, d2(jko, eps)) for jko mode.
  std::vector<std::pair<double, double>> crossval;
  std::optional<LocalNonlocalComparison> comparison;
  std::vector<std::string> outputs;
};

SingleRunResult run_single(const ExperimentConfig& cfg, RunMode mode, bool persist = true);

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::string& path);

/// Writes manifest.json listing every output with its SHA-256.
std::string write_manifest(const ExperimentConfig& cfg, const std::vector<std::string>& outputs,
                           const nlohmann::json& extra);

/// Breakpoints, unstable set and m0 of a potential.
nlohmann::json envelope_json(const PotentialSpec& spec, const ConvexEnvelope& env, const UnstableSet& sigma);
nlohmann::json hypothesis_json(const HypothesisReport& rep);
nlohmann::json audit_json(const AuditReport& rep);
nlohmann::json wrinkle_json(const WrinkleReport& rep);

}  // namespace dchlab
