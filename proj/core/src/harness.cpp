#include "dchlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Core>
#include <fftw3.h>
#include <openssl/evp.h>

#include "dchlab/errors.hpp"
#include "dchlab/functionals.hpp"
#include "dchlab/version.hpp"
#include "dchlab/wasserstein.hpp"

namespace dchlab {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

double param(const json& p, const char* key, double fallback) {
  if (!p.contains(key)) return fallback;
  if (!p.at(key).is_number()) throw InvalidInput(std::string("initial data parameter '") + key + "' must be a number");
  return p.at(key).get<double>();
}

}  // namespace

PotentialSpec potential_from_json(const json& j) {
  if (j.is_string()) return PotentialSpec::builtin(j.get<std::string>());
  check_keys(j, {"name", "coefficients", "domain_max"}, "potential");
  const auto name = get_or<std::string>(j, "name", "custom", "potential");
  if (!j.contains("coefficients")) {
    auto spec = PotentialSpec::builtin(name);
    if (j.contains("domain_max")) spec = spec.with_domain_max(j.at("domain_max").get<double>());
    return spec;
  }
  const auto coeffs = get_or<std::vector<double>>(j, "coefficients", {}, "potential");
  const double dmax = get_or<double>(j, "domain_max", 4.0, "potential");
  return PotentialSpec::polynomial(name, coeffs, dmax);
}

std::vector<double> default_output_times(double t_end, std::size_t count) {
  std::vector<double> out;
  if (count == 0) return out;
  if (count == 1) return {t_end};
  const double a = std::log(t_end / 1000.0), b = std::log(t_end);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1)));
  }
  out.back() = t_end;
  return out;
}

std::size_t grid_for_eps(std::size_t n_base, double eps) {
  return std::max(n_base, static_cast<std::size_t>(std::ceil(8.0 / eps)));
}

DensityField generate_initial(const std::string& name, const json& params, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidInput("initial data needs n > 0");
  const json p = params.is_null() ? json::object() : params;
  static const std::map<std::string, std::set<std::string>> allowed = {
      {"uniform", {"noise"}},
      {"cosine", {"amplitude", "mode", "phase", "noise"}},
      {"bump", {"center", "width", "floor", "noise"}},
      {"two-phase", {"low", "high", "fraction", "center", "width", "noise"}}};
  const auto it = allowed.find(name);
  if (it == allowed.end()) throw InvalidInput("unknown initial data generator '" + name + "'");
  for (const auto& [key, value] : p.items()) {
    if (!it->second.count(key)) throw InvalidInput("generator '" + name + "' has no parameter '" + key + "'");
  }
  const double pi = std::acos(-1.0);
  std::vector<double> v(n);
  const double h = 1.0 / static_cast<double>(n);
  if (name == "uniform") {
    std::fill(v.begin(), v.end(), 1.0);
  } else if (name == "cosine") {
    const double a = param(p, "amplitude", 0.1);
    const double k = param(p, "mode", 1.0);
    const double phase = param(p, "phase", 0.0);
    if (!(std::abs(a) < 1.0)) throw InvalidInput("cosine amplitude must satisfy |a| < 1");
    if (k != std::floor(k) || k < 1.0) throw InvalidInput("cosine mode must be a positive integer");
    // Cell averages of 1 + a cos(2 pi k x + phase).
    const double w = 2.0 * pi * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double x0 = static_cast<double>(j) * h, x1 = x0 + h;
      v[j] = 1.0 + a * (std::sin(w * x1 + phase) - std::sin(w * x0 + phase)) / (w * h);
    }
  } else if (name == "bump") {
    const double c = param(p, "center", 0.5);
    const double w = param(p, "width", 0.2);
    const double floor = param(p, "floor", 0.1);
    if (!(w > 0.0 && w <= 1.0)) throw InvalidInput("bump width must lie in (0, 1]");
    if (floor < 0.0) throw InvalidInput("bump floor must be non-negative");
    for (std::size_t j = 0; j < n; ++j) {
      double d = (static_cast<double>(j) + 0.5) * h - c;
      d -= std::nearbyint(d);
      const double y = 2.0 * d / w;
      v[j] = floor + (std::abs(y) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - y * y)) : 0.0);
    }
  } else {
    const double lo = param(p, "low", 0.1);
    const double hi = param(p, "high", 2.0);
    if (lo < 0.0 || hi < 0.0) throw InvalidInput("two-phase levels must be non-negative");
    if (!(hi > lo)) throw InvalidInput("two-phase needs high > low");
    const double frac = param(p, "fraction", (1.0 - lo) / (hi - lo));
    if (!(frac > 0.0 && frac < 1.0)) throw InvalidInput("two-phase fraction must lie in (0, 1)");
    const double c = param(p, "center", 0.5);
    const double w = param(p, "width", 0.02);
    if (!(w > 0.0)) throw InvalidInput("two-phase width must be positive");
    const double a = c - 0.5 * frac, b = c + 0.5 * frac;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = (static_cast<double>(j) + 0.5) * h;
      double s = 0.0;
      for (int rep = -1; rep <= 1; ++rep) {
        s += 0.5 * (std::tanh((x + rep - a) / w) - std::tanh((x + rep - b) / w));
      }
      v[j] = lo + (hi - lo) * std::clamp(s, 0.0, 1.0);
    }
  }
  const double noise = param(p, "noise", 0.0);
  if (noise != 0.0) {
    if (!(std::abs(noise) < 1.0)) throw InvalidInput("noise must satisfy |noise| < 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& x : v) x *= 1.0 + noise * dist(rng);
  }
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidInput("initial data '" + name + "' is negative or not finite");
  }
  DensityField f(std::move(v));
  f.normalize();
  return f;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  check_keys(doc, {"potential", "solver", "jko", "eps_list", "initial_data", "output_times", "seed", "output_dir",
                   "threads", "allow_ill_prepared", "limit_dt", "diagnostics"},
             "config");
  ExperimentConfig cfg;
  cfg.potential_json = doc.contains("potential") ? doc.at("potential") : json("quartic-spinodal");
  try {
    cfg.potential = potential_from_json(cfg.potential_json);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }

  const json s = doc.value("solver", json::object());
  check_keys(s, {"n", "dt", "t_end", "theta_scheme", "max_newton", "newton_tol", "positivity_mode", "dt_min",
                 "energy_slack", "speed_m"},
             "solver");
  auto& sc = cfg.solver;
  sc.n = get_or<std::size_t>(s, "n", sc.n, "solver");
  sc.dt = get_or<double>(s, "dt", sc.dt, "solver");
  sc.t_end = get_or<double>(s, "t_end", sc.t_end, "solver");
  sc.theta_scheme = get_or<double>(s, "theta_scheme", sc.theta_scheme, "solver");
  sc.max_newton = get_or<int>(s, "max_newton", sc.max_newton, "solver");
  sc.newton_tol = get_or<double>(s, "newton_tol", sc.newton_tol, "solver");
  sc.positivity_mode =
      positivity_mode_from_string(get_or<std::string>(s, "positivity_mode", to_string(sc.positivity_mode), "solver"));
  sc.dt_min = get_or<double>(s, "dt_min", sc.dt_min, "solver");
  sc.energy_slack = get_or<double>(s, "energy_slack", sc.energy_slack, "solver");
  sc.speed_m = get_or<std::size_t>(s, "speed_m", sc.speed_m, "solver");

  const json jj = doc.value("jko", json::object());
  check_keys(jj, {"tau", "m", "inner_tol", "inner_max", "reconstruct_bandwidth", "n", "min_separation", "lbfgs_memory",
                 "inner_solver"},
             "jko");
  auto& jc = cfg.jko;
  jc.tau = get_or<double>(jj, "tau", jc.tau, "jko");
  jc.m = get_or<std::size_t>(jj, "m", jc.m, "jko");
  jc.inner_tol = get_or<double>(jj, "inner_tol", jc.inner_tol, "jko");
  jc.inner_max = get_or<int>(jj, "inner_max", jc.inner_max, "jko");
  jc.reconstruct_bandwidth = get_or<double>(jj, "reconstruct_bandwidth", jc.reconstruct_bandwidth, "jko");
  jc.n = get_or<std::size_t>(jj, "n", jc.n, "jko");
  jc.min_separation = get_or<double>(jj, "min_separation", jc.min_separation, "jko");
  jc.lbfgs_memory = get_or<int>(jj, "lbfgs_memory", jc.lbfgs_memory, "jko");
  jc.inner_solver =
      jko_inner_solver_from_string(get_or<std::string>(jj, "inner_solver", to_string(jc.inner_solver), "jko"));

  cfg.eps_list = get_or<std::vector<double>>(doc, "eps_list", {0.1}, "config");

  const json init = doc.value("initial_data", json{{"name", "uniform"}});
  if (!init.is_object() || !init.contains("name") || !init.at("name").is_string())
    throw ConfigError("initial_data needs a string 'name'");
  cfg.initial.name = init.at("name").get<std::string>();
  cfg.initial.params = json::object();
  for (const auto& [key, value] : init.items()) {
    if (key != "name") cfg.initial.params[key] = value;
  }

  cfg.output_times = get_or<std::vector<double>>(doc, "output_times", default_output_times(sc.t_end), "config");
  sc.output_times = cfg.output_times;
  cfg.seed = get_or<std::uint64_t>(doc, "seed", 0, "config");
  cfg.output_dir = get_or<std::string>(doc, "output_dir", cfg.output_dir, "config");
  cfg.threads = get_or<unsigned>(doc, "threads", 0, "config");
  cfg.allow_ill_prepared = get_or<bool>(doc, "allow_ill_prepared", false, "config");
  cfg.limit_dt = get_or<double>(doc, "limit_dt", 0.0, "config");

  const json d = doc.value("diagnostics", json::object());
  check_keys(d, {"eta", "delta", "L", "audit_tol"}, "diagnostics");
  cfg.diagnostics.eta = get_or<double>(d, "eta", cfg.diagnostics.eta, "diagnostics");
  cfg.diagnostics.delta = get_or<double>(d, "delta", cfg.diagnostics.delta, "diagnostics");
  cfg.diagnostics.L = get_or<double>(d, "L", cfg.diagnostics.L, "diagnostics");
  cfg.diagnostics.audit_tol = get_or<double>(d, "audit_tol", cfg.diagnostics.audit_tol, "diagnostics");

  // Generator parameters are checked eagerly so typos fail at load time.
  try {
    generate_initial(cfg.initial.name, cfg.initial.params, 16, cfg.seed);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  cfg.validate();
  cfg.document = cfg.to_json();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    is >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

void ExperimentConfig::validate() const {
  solver.validate();
  jko.validate();
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0)) throw ConfigError("eps_list entries must be positive");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw ConfigError("eps_list must be strictly decreasing");
  }
  if (!std::is_sorted(output_times.begin(), output_times.end())) throw ConfigError("output_times must be sorted");
  for (double t : output_times) {
    if (t < 0.0 || t > solver.t_end) throw ConfigError("output_times must lie in [0, t_end]");
  }
  if (limit_dt < 0.0) throw ConfigError("limit_dt must be non-negative");
  if (!(diagnostics.eta > 0.0) || !(diagnostics.delta > 0.0)) throw ConfigError("diagnostics eta and delta must be positive");
}

json ExperimentConfig::to_json() const {
  json init = initial.params;
  init["name"] = initial.name;
  return json{{"potential", potential_json},
              {"solver",
               {{"n", solver.n},
                {"dt", solver.dt},
                {"t_end", solver.t_end},
                {"theta_scheme", solver.theta_scheme},
                {"max_newton", solver.max_newton},
                {"newton_tol", solver.newton_tol},
                {"positivity_mode", to_string(solver.positivity_mode)},
                {"dt_min", solver.dt_min},
                {"energy_slack", solver.energy_slack},
                {"speed_m", solver.speed_m}}},
              {"jko",
               {{"tau", jko.tau},
                {"m", jko.m},
                {"inner_tol", jko.inner_tol},
                {"inner_max", jko.inner_max},
                {"reconstruct_bandwidth", jko.reconstruct_bandwidth},
                {"n", jko.n},
                {"min_separation", jko.min_separation},
                {"lbfgs_memory", jko.lbfgs_memory},
                {"inner_solver", to_string(jko.inner_solver)}}},
              {"eps_list", eps_list},
              {"initial_data", init},
              {"output_times", output_times},
              {"seed", seed},
              {"output_dir", output_dir},
              {"threads", threads},
              {"allow_ill_prepared", allow_ill_prepared},
              {"limit_dt", limit_dt},
              {"diagnostics",
               {{"eta", diagnostics.eta},
                {"delta", diagnostics.delta},
                {"L", diagnostics.L},
                {"audit_tol", diagnostics.audit_tol}}}};
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "eps") return RunMode::Eps;
  if (s == "limit") return RunMode::Limit;
  if (s == "jko") return RunMode::Jko;
  if (s == "nonlocal") return RunMode::Nonlocal;
  throw ConfigError("unknown mode '" + s + "'");
}

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Eps: return "eps";
    case RunMode::Limit: return "limit";
    case RunMode::Jko: return "jko";
    case RunMode::Nonlocal: return "nonlocal";
  }
  return "eps";
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(md[i]);
  return os.str();
}

std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return sha256_hex(ss.str());
}

std::string write_manifest(const ExperimentConfig& cfg, const std::vector<std::string>& outputs, const json& extra) {
  json manifest;
  manifest["config"] = cfg.document;
  manifest["config_hash"] = sha256_hex(cfg.document.dump());
  manifest["versions"] = {{"dchlab", std::string(kVersion)},
                          {"git_describe", std::string(kGitDescribe)},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                        "." + std::to_string(EIGEN_MINOR_VERSION)},
                          {"fftw", std::string(fftw_version)},
                          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  json files = json::array();
  for (const auto& path : outputs) {
    files.push_back({{"path", std::filesystem::path(path).filename().string()}, {"sha256", sha256_file(path)}});
  }
  manifest["outputs"] = files;
  for (const auto& [key, value] : extra.items()) manifest[key] = value;
  const auto path = (std::filesystem::path(cfg.output_dir) / "manifest.json").string();
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write '" + path + "'");
  os << manifest.dump(2) << '\n';
  return path;
}

json envelope_json(const PotentialSpec& spec, const ConvexEnvelope& env, const UnstableSet& sigma) {
  json pieces = json::array();
  for (const auto& p : env.pieces()) {
    pieces.push_back({{"a", p.a}, {"b", p.b}, {"slope", p.slope}, {"value_at_a", p.value_at_a}, {"max_gap", p.max_gap}});
  }
  json intervals = json::array();
  for (const auto& iv : sigma.intervals) intervals.push_back({iv.lo, iv.hi});
  return {{"potential", spec.name},
          {"domain_max", spec.domain_max},
          {"breakpoints", env.breakpoints()},
          {"affine_pieces", pieces},
          {"sigma", intervals},
          {"degenerate_first", sigma.degenerate_first},
          {"m0", sigma.m0}};
}

json hypothesis_json(const HypothesisReport& rep) {
  return {{"q1_growth_ratio", rep.q1_growth_ratio},
          {"w1_growth_ratio", rep.w1_growth_ratio},
          {"q1_monotone_tail", rep.q1_monotone_tail},
          {"min_w2_off_sigma", rep.min_w2_off_sigma},
          {"h4_margin", rep.h4_margin},
          {"nonnegative", rep.nonnegative},
          {"violations", rep.violations},
          {"notes", rep.notes},
          {"clean", rep.clean()}};
}

json audit_json(const AuditReport& rep) {
  json rows = json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"t", r.t},
                    {"energy", r.energy},
                    {"slope_integral", r.slope_integral},
                    {"speed_integral", r.speed_integral},
                    {"residual", r.residual}});
  }
  return {{"flow", rep.flow},
          {"e0", rep.e0},
          {"tolerance", rep.tolerance},
          {"min_residual", rep.min_residual},
          {"max_abs_residual", rep.max_abs_residual},
          {"passed", rep.passed},
          {"rows", rows}};
}

json wrinkle_json(const WrinkleReport& rep) {
  json v = json::array();
  for (const auto& w : rep.violations) {
    v.push_back({{"x", w.x}, {"y", w.y}, {"osc", w.osc}, {"min_dist_to_sigma", w.min_dist_to_sigma}});
  }
  return {{"eta", rep.eta},
          {"delta", rep.delta},
          {"L", rep.L},
          {"violations", v},
          {"oscillating_mass_fraction", rep.oscillating_mass_fraction},
          {"oscillating_mass_off_sigma", rep.oscillating_mass_off_sigma},
          {"sigma_localized", rep.sigma_localized},
          {"pairs_checked", rep.pairs_checked},
          {"oscillating_cells", rep.oscillating_cells}};
}

namespace {

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write '" + path + "'");
  os << doc.dump(2) << '\n';
}

json events_json(const TrajectoryRecord& traj) {
  json ev = json::array();
  for (const auto& e : traj.events) ev.push_back({{"t", e.t}, {"kind", e.kind}, {"detail", e.detail}});
  return {{"aborted", traj.aborted}, {"abort_reason", traj.abort_reason}, {"events", ev}};
}

std::string eps_tag(double eps) {
  std::ostringstream os;
  os << std::setprecision(6) << eps;
  return os.str();
}

}  // namespace

SweepReport run_sweep(const ExperimentConfig& cfg, bool persist) {
  cfg.validate();
  if (cfg.eps_list.empty()) throw ConfigError("run_sweep needs a non-empty eps_list");
  const auto& spec = cfg.potential;
  const auto env = compute_convex_envelope(spec);
  const auto sigma = compute_unstable_set(spec, env);
  const std::size_t n_base = cfg.solver.n;
  const DensityField f0 = generate_initial(cfg.initial.name, cfg.initial.params, n_base, cfg.seed);

  SweepReport rep;
  std::vector<std::pair<double, DensityField>> family;
  for (double eps : cfg.eps_list) {
    family.emplace_back(eps, generate_initial(cfg.initial.name, cfg.initial.params, grid_for_eps(n_base, eps), cfg.seed));
  }
  rep.preparedness = well_preparedness(family, f0, env, spec);
  if (!rep.preparedness.well_prepared && !cfg.allow_ill_prepared) {
    throw HypothesisViolation("initial data are not well prepared; set allow_ill_prepared to override");
  }

  SolverConfig lc = cfg.solver;
  lc.eps = 0.0;
  lc.n = n_base;
  if (cfg.limit_dt > 0.0) lc.dt = cfg.limit_dt;
  rep.limit = simulate_limit(f0, lc, env);

  rep.rows.resize(cfg.eps_list.size());
  rep.runs.resize(cfg.eps_list.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cfg.eps_list.size(); i = next++) {
      SweepRow& row = rep.rows[i];
      row.eps = cfg.eps_list[i];
      row.n = family[i].second.size();
      try {
        SolverConfig c = cfg.solver;
        c.eps = row.eps;
        c.n = row.n;
        rep.runs[i] = simulate_eps(family[i].second, c, spec, env);
        if (rep.runs[i].aborted) {
          row.aborted = true;
          row.error = rep.runs[i].abort_reason;
        }
      } catch (const std::exception& e) {
        row.aborted = true;
        row.error = e.what();
      }
    }
  };
  const unsigned threads =
      std::max(1u, std::min<unsigned>(cfg.threads ? cfg.threads : std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(cfg.eps_list.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    SweepRow& row = rep.rows[i];
    const auto& run = rep.runs[i];
    const std::size_t k = std::min(run.size(), rep.limit.size());
    std::size_t lsc_pass = 0;
    double prev_gap2 = 0.0;
    for (std::size_t s = 0; s < k; ++s) {
      const double d2 = w2_periodic(run.snapshots[s], rep.limit.snapshots[s]);
      row.sup_t_d2_to_limit = std::max(row.sup_t_d2_to_limit, d2);
      const double egap = std::abs(run.reports[s].e_eps - rep.limit.reports[s].e_star);
      row.energy_gap_max = std::max(row.energy_gap_max, egap);
      row.energy_gap_final = egap;
      const double star = rep.limit.reports[s].slope_star;
      const double gap2 = std::pow(run.reports[s].slope_eps - star, 2);
      if (s > 0) row.slope_gap_L2 += 0.5 * (run.times[s] - run.times[s - 1]) * (gap2 + prev_gap2);
      prev_gap2 = gap2;
      if (run.reports[s].slope_eps >= star - (0.1 * star + 1e-3)) ++lsc_pass;
    }
    row.lsc_pass_rate = k ? static_cast<double>(lsc_pass) / static_cast<double>(k) : 0.0;
    if (!run.snapshots.empty()) {
      const auto w = wrinkling_report(run.snapshots.back(), sigma, cfg.diagnostics.eta, cfg.diagnostics.delta,
                                      cfg.diagnostics.L);
      row.wrinkle_violations = w.violations.size();
      row.oscillating_mass_fraction = w.oscillating_mass_fraction;
    }
  }

  if (persist) {
    std::filesystem::create_directories(cfg.output_dir);
    const auto csv = out_path(cfg, "sweep.csv");
    {
      std::ofstream os(csv);
      os << "eps,n,sup_t_d2_to_limit,slope_gap_L2,energy_gap_max,energy_gap_final,lsc_pass_rate,wrinkle_violations,"
            "oscillating_mass_fraction,aborted\n"
         << std::setprecision(17);
      for (const auto& r : rep.rows) {
        os << r.eps << ',' << r.n << ',' << r.sup_t_d2_to_limit << ',' << r.slope_gap_L2 << ',' << r.energy_gap_max
           << ',' << r.energy_gap_final << ',' << r.lsc_pass_rate << ',' << r.wrinkle_violations << ','
           << r.oscillating_mass_fraction << ',' << (r.aborted ? 1 : 0) << '\n';
      }
    }
    rep.outputs.push_back(csv);
    const auto lim = out_path(cfg, "limit.csv");
    write_trajectory_csv(rep.limit, lim);
    rep.outputs.push_back(lim);
    json rows = json::array();
    json grid = json::object();
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
      const auto path = out_path(cfg, "eps_" + eps_tag(rep.rows[i].eps) + ".csv");
      write_trajectory_csv(rep.runs[i], path);
      rep.outputs.push_back(path);
      grid[eps_tag(rep.rows[i].eps)] = rep.rows[i].n;
      rows.push_back({{"eps", rep.rows[i].eps},
                      {"n", rep.rows[i].n},
                      {"sup_t_d2_to_limit", rep.rows[i].sup_t_d2_to_limit},
                      {"slope_gap_L2", rep.rows[i].slope_gap_L2},
                      {"energy_gap_max", rep.rows[i].energy_gap_max},
                      {"energy_gap_final", rep.rows[i].energy_gap_final},
                      {"lsc_pass_rate", rep.rows[i].lsc_pass_rate},
                      {"wrinkle_violations", rep.rows[i].wrinkle_violations},
                      {"oscillating_mass_fraction", rep.rows[i].oscillating_mass_fraction},
                      {"aborted", rep.rows[i].aborted},
                      {"error", rep.rows[i].error},
                      {"events", events_json(rep.runs[i])}});
    }
    const auto report_path = out_path(cfg, "sweep.json");
    write_json_file(report_path, {{"rows", rows}, {"limit_events", events_json(rep.limit)}});
    rep.outputs.push_back(report_path);
    write_manifest(cfg, rep.outputs, {{"grid", grid}, {"envelope", envelope_json(spec, env, sigma)}});
  }
  return rep;
}

SingleRunResult run_single(const ExperimentConfig& cfg, RunMode mode, bool persist) {
  cfg.validate();
  const auto& spec = cfg.potential;
  const auto env = compute_convex_envelope(spec);
  const auto sigma = compute_unstable_set(spec, env);
  const double eps = cfg.eps_list.empty() ? 0.0 : cfg.eps_list.front();
  if (mode != RunMode::Limit && !(eps > 0.0)) throw ConfigError("mode " + to_string(mode) + " needs eps_list");
  SingleRunResult res;
  json extra = {{"mode", to_string(mode)}, {"envelope", envelope_json(spec, env, sigma)}};

  SolverConfig sc = cfg.solver;
  switch (mode) {
    case RunMode::Eps: {
      sc.eps = eps;
      sc.n = grid_for_eps(cfg.solver.n, eps);
      const auto f0 = generate_initial(cfg.initial.name, cfg.initial.params, sc.n, cfg.seed);
      res.trajectory = simulate_eps(f0, sc, spec, env);
      extra["grid"] = sc.n;
      break;
    }
    case RunMode::Limit: {
      sc.eps = 0.0;
      if (cfg.limit_dt > 0.0) sc.dt = cfg.limit_dt;
      const auto f0 = generate_initial(cfg.initial.name, cfg.initial.params, sc.n, cfg.seed);
      res.trajectory = simulate_limit(f0, sc, env);
      extra["positivity_dt_bound"] = "inf";
      break;
    }
    case RunMode::Jko: {
      const auto f0 = generate_initial(cfg.initial.name, cfg.initial.params, sc.n, cfg.seed);
      auto run = simulate_jko(f0, cfg.jko, eps, spec, sc.t_end);
      res.trajectory = std::move(run.trajectory);
      res.ledger = std::move(run.ledger);
      SolverConfig ec = sc;
      ec.eps = eps;
      ec.output_times.assign(res.trajectory.times.begin() + 1, res.trajectory.times.end());
      ec.record_speeds = false;
      const auto ref = simulate_eps(f0, ec, spec, env);
      for (std::size_t k = 0; k < std::min(ref.size(), res.trajectory.size()); ++k) {
        res.crossval.emplace_back(ref.times[k], w2_periodic(ref.snapshots[k], res.trajectory.snapshots[k]));
      }
      break;
    }
    case RunMode::Nonlocal: {
      if (spec.name != "cubic-motivation") throw ConfigError("nonlocal mode needs the cubic-motivation potential");
      const auto f0 = generate_initial(cfg.initial.name, cfg.initial.params, sc.n, cfg.seed);
      const auto kern = bump_kernel();
      auto cmp = compare_local_nonlocal(f0, eps, kern, spec, sc.t_end, sc.output_times, sc.dt);
      res.trajectory = cmp.nonlocal;
      extra["kernel"] = {{"name", kern.name}, {"k0", kern.k0}, {"eps", eps}, {"eps_eff", cmp.eps_eff}};
      res.comparison = std::move(cmp);
      break;
    }
  }
  res.audit = energy_dissipation_audit(res.trajectory, cfg.diagnostics.audit_tol);
  if (!res.trajectory.snapshots.empty()) {
    res.wrinkle = wrinkling_report(res.trajectory.snapshots.back(), sigma, cfg.diagnostics.eta, cfg.diagnostics.delta,
                                   cfg.diagnostics.L);
  }

  if (persist) {
    std::filesystem::create_directories(cfg.output_dir);
    const auto traj_path = out_path(cfg, "trajectory.csv");
    write_trajectory_csv(res.trajectory, traj_path);
    res.outputs.push_back(traj_path);
    const auto snap_path = out_path(cfg, "snapshots.json");
    write_snapshots_json(res.trajectory, snap_path);
    res.outputs.push_back(snap_path);
    const auto audit_path = out_path(cfg, "audit.json");
    write_json_file(audit_path, audit_json(res.audit));
    res.outputs.push_back(audit_path);
    const auto wr_path = out_path(cfg, "wrinkle.json");
    write_json_file(wr_path, wrinkle_json(res.wrinkle));
    res.outputs.push_back(wr_path);
    const auto ev_path = out_path(cfg, "events.json");
    write_json_file(ev_path, events_json(res.trajectory));
    res.outputs.push_back(ev_path);
    if (!res.ledger.empty()) {
      const auto p = out_path(cfg, "ledger.csv");
      write_ledger_csv(res.ledger, p);
      res.outputs.push_back(p);
    }
    if (!res.crossval.empty()) {
      const auto p = out_path(cfg, "crossval.csv");
      std::ofstream os(p);
      os << "t,d2_jko_eps\n" << std::setprecision(17);
      for (const auto& [t, d] : res.crossval) os << t << ',' << d << '\n';
      os.close();
      res.outputs.push_back(p);
    }
    if (res.comparison) {
      const auto p = out_path(cfg, "comparison.csv");
      std::ofstream os(p);
      os << "t,d2_local_nonlocal\n" << std::setprecision(17);
      for (std::size_t i = 0; i < res.comparison->times.size(); ++i)
        os << res.comparison->times[i] << ',' << res.comparison->d2_gap[i] << '\n';
      os.close();
      res.outputs.push_back(p);
      extra["comparison"] = {{"max_local", res.comparison->max_local}, {"max_nonlocal", res.comparison->max_nonlocal}};
    }
    write_manifest(cfg, res.outputs, extra);
  }
  return res;
}

}  // namespace dchlab
