// dchlab command line front end.
//
// Exit codes: 0 success, 2 hypothesis violation (ill-prepared data, failed
// potential audit or failed energy audit), 1 any other failure.

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "dchlab/diagnostics.hpp"
#include "dchlab/errors.hpp"
#include "dchlab/harness.hpp"
#include "dchlab/potential.hpp"
#include "dchlab/trajectory.hpp"
#include "dchlab/version.hpp"

namespace {

using nlohmann::json;

dchlab::PotentialSpec load_potential(const std::string& name, double domain_max) {
  auto spec = dchlab::PotentialSpec::builtin(name);
  if (domain_max > 0.0) spec = spec.with_domain_max(domain_max);
  return spec;
}

int cmd_simulate(const std::string& config, const std::string& mode, const std::string& out_dir) {
  auto cfg = dchlab::ExperimentConfig::from_file(config);
  if (!out_dir.empty()) {
    cfg.output_dir = out_dir;
    cfg.document = cfg.to_json();
  }
  const auto res = dchlab::run_single(cfg, dchlab::run_mode_from_string(mode));
  const auto& tr = res.trajectory;
  json summary = {{"mode", mode},
                  {"snapshots", tr.size()},
                  {"t_final", tr.times.empty() ? 0.0 : tr.times.back()},
                  {"aborted", tr.aborted},
                  {"events", tr.events.size()},
                  {"audit_passed", res.audit.passed},
                  {"audit_min_residual", res.audit.min_residual},
                  {"wrinkle_violations", res.wrinkle.violations.size()},
                  {"outputs", res.outputs}};
  if (!res.crossval.empty()) summary["crossval_final_d2"] = res.crossval.back().second;
  std::cout << summary.dump(2) << '\n';
  if (tr.aborted) {
    std::cerr << "run aborted: " << tr.abort_reason << '\n';
    return 1;
  }
  return 0;
}

int cmd_sweep(const std::string& config, const std::string& out_dir) {
  auto cfg = dchlab::ExperimentConfig::from_file(config);
  if (!out_dir.empty()) {
    cfg.output_dir = out_dir;
    cfg.document = cfg.to_json();
  }
  const auto rep = dchlab::run_sweep(cfg);
  json rows = json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"eps", r.eps},
                    {"n", r.n},
                    {"sup_t_d2_to_limit", r.sup_t_d2_to_limit},
                    {"slope_gap_L2", r.slope_gap_L2},
                    {"energy_gap_max", r.energy_gap_max},
                    {"energy_gap_final", r.energy_gap_final},
                    {"lsc_pass_rate", r.lsc_pass_rate},
                    {"wrinkle_violations", r.wrinkle_violations},
                    {"aborted", r.aborted},
                    {"error", r.error}});
  }
  std::cout << json{{"rows", rows}, {"outputs", rep.outputs}}.dump(2) << '\n';
  return 0;
}

int cmd_envelope(const std::string& name, double domain_max) {
  const auto spec = load_potential(name, domain_max);
  const auto env = dchlab::compute_convex_envelope(spec);
  const auto sigma = dchlab::compute_unstable_set(spec, env);
  std::cout << dchlab::envelope_json(spec, env, sigma).dump(2) << '\n';
  return 0;
}

int cmd_validate(const std::string& name, double domain_max) {
  const auto spec = load_potential(name, domain_max);
  const auto env = dchlab::compute_convex_envelope(spec);
  const auto rep = dchlab::validate_hypotheses(spec, env);
  std::cout << dchlab::hypothesis_json(rep).dump(2) << '\n';
  return rep.clean() ? 0 : 2;
}

int cmd_audit(const std::string& path, const std::string& flow, double tol) {
  auto traj = dchlab::read_trajectory_csv(path);
  if (!flow.empty()) traj.flow = flow;
  const auto rep = dchlab::energy_dissipation_audit(traj, tol);
  std::cout << dchlab::audit_json(rep).dump(2) << '\n';
  return rep.passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffuse-interface gradient flow lab"};
  app.set_version_flag("--version", std::string(dchlab::kVersion) + " (" + dchlab::kGitDescribe + ")");
  app.require_subcommand(1);

  std::string config, mode = "eps", out_dir, potential, trajectory, flow;
  double domain_max = 0.0, tol = 1e-3;

  auto* sim = app.add_subcommand("simulate", "Run one flow and write its artifacts");
  sim->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--mode", mode, "Flow to run")->check(CLI::IsMember({"eps", "limit", "jko", "nonlocal"}));
  sim->add_option("--output-dir", out_dir, "Override output_dir");

  auto* sweep = app.add_subcommand("sweep", "Limit run plus one run per eps");
  sweep->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--output-dir", out_dir, "Override output_dir");

  auto* envelope = app.add_subcommand("envelope", "Print breakpoints, unstable set and m0 as JSON");
  envelope->add_option("--potential", potential, "Built-in potential name")->required();
  envelope->add_option("--domain-max", domain_max, "Working interval upper end");

  auto* audit = app.add_subcommand("audit", "Energy-dissipation audit of a trajectory CSV");
  audit->add_option("--trajectory", trajectory, "Trajectory CSV")->required()->check(CLI::ExistingFile);
  audit->add_option("--flow", flow, "Override the flow recorded in the file")
      ->check(CLI::IsMember({"eps", "limit", "jko", "nonlocal"}));
  audit->add_option("--tol", tol, "Relative tolerance");

  auto* validate = app.add_subcommand("validate-potential", "Check the structural assumptions on W");
  validate->add_option("--potential", potential, "Built-in potential name")->required();
  validate->add_option("--domain-max", domain_max, "Working interval upper end");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; usage errors count as runtime failures.
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*sim) return cmd_simulate(config, mode, out_dir);
    if (*sweep) return cmd_sweep(config, out_dir);
    if (*envelope) return cmd_envelope(potential, domain_max);
    if (*audit) return cmd_audit(trajectory, flow, tol);
    if (*validate) return cmd_validate(potential, domain_max);
  } catch (const dchlab::HypothesisViolation& e) {
    std::cerr << "hypothesis violation: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
