#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dchlab/errors.hpp"
#include "dchlab/functionals.hpp"
#include "dchlab/harness.hpp"

using namespace dchlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("dchlab-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

json small_config(const fs::path& out) {
  return {{"potential", "quartic-spinodal"},
          {"solver", {{"n", 32}, {"dt", 1e-3}, {"t_end", 0.01}}},
          {"eps_list", {0.2, 0.1}},
          {"initial_data", {{"name", "cosine"}, {"amplitude", 0.1}}},
          {"output_times", {0.0025, 0.005, 0.01}},
          {"output_dir", out.string()},
          {"threads", 1}};
}

}  // namespace

TEST(Config, RejectsUnknownKeys) {
  auto doc = small_config("x");
  doc["sovler"] = json::object();
  EXPECT_THROW(ExperimentConfig::from_json(doc), ConfigError);
  doc = small_config("x");
  doc["solver"]["dtt"] = 1.0;
  EXPECT_THROW(ExperimentConfig::from_json(doc), ConfigError);
  doc = small_config("x");
  doc["jko"] = {{"tau", 1e-3}, {"mm", 3}};
  EXPECT_THROW(ExperimentConfig::from_json(doc), ConfigError);
  doc = small_config("x");
  doc["initial_data"]["amplitde"] = 0.1;
  EXPECT_THROW(ExperimentConfig::from_json(doc), Error);
}

TEST(Config, ValidatesOrdering) {
  auto doc = small_config("x");
  doc["eps_list"] = {0.1, 0.2};
  EXPECT_THROW(ExperimentConfig::from_json(doc), ConfigError);
  doc["eps_list"] = {0.1, -0.05};
  EXPECT_THROW(ExperimentConfig::from_json(doc), ConfigError);
  doc = small_config("x");
  doc["output_times"] = {0.005, 0.001};
  EXPECT_THROW(ExperimentConfig::from_json(doc), ConfigError);
  doc["output_times"] = {0.005, 0.5};
  EXPECT_THROW(ExperimentConfig::from_json(doc), ConfigError);
}

TEST(Config, RoundTripsThroughJson) {
  const auto cfg = ExperimentConfig::from_json(small_config("rt"));
  EXPECT_EQ(cfg.solver.n, 32u);
  EXPECT_EQ(cfg.potential.name, "quartic-spinodal");
  const auto again = ExperimentConfig::from_json(cfg.to_json());
  EXPECT_EQ(again.to_json().dump(), cfg.to_json().dump());
  EXPECT_EQ(again.document.dump(), cfg.document.dump());
}

TEST(Config, PotentialFromJson) {
  EXPECT_EQ(potential_from_json("quartic-wrinkle").name, "quartic-wrinkle");
  const auto p = potential_from_json({{"name", "mine"}, {"coefficients", {0.0, 0.0, 1.0}}, {"domain_max", 5.0}});
  EXPECT_NEAR(p.eval_w(2.0), 4.0, 1e-14);
  EXPECT_EQ(p.domain_max, 5.0);
  EXPECT_THROW(potential_from_json({{"name", "mine"}, {"coef", {1.0}}}), ConfigError);
}

TEST(Generators, BuiltIns) {
  const auto u = generate_initial("uniform", json::object(), 64);
  EXPECT_DOUBLE_EQ(u.min(), 1.0);
  EXPECT_DOUBLE_EQ(u.max(), 1.0);
  const auto c = generate_initial("cosine", {{"amplitude", 0.1}, {"mode", 1}}, 512);
  EXPECT_NEAR(c.min(), 0.9, 1e-4);
  EXPECT_NEAR(c.max(), 1.1, 1e-4);
  EXPECT_NEAR(c.mass(), 1.0, 1e-14);
  for (const char* name : {"bump", "two-phase"}) {
    const auto f = generate_initial(name, json::object(), 128);
    EXPECT_GE(f.min(), 0.0) << name;
    EXPECT_NEAR(f.mass(), 1.0, 1e-13) << name;
  }
  EXPECT_THROW(generate_initial("cosine", {{"amplitude", 1.2}}, 64), InvalidInput);
  EXPECT_THROW(generate_initial("square", json::object(), 64), InvalidInput);
  EXPECT_THROW(generate_initial("bump", {{"hight", 1.0}}, 64), InvalidInput);
}

TEST(Generators, NoiseIsSeeded) {
  const json p = {{"amplitude", 0.1}, {"noise", 0.05}};
  const auto a = generate_initial("cosine", p, 64, 7), b = generate_initial("cosine", p, 64, 7);
  const auto c = generate_initial("cosine", p, 64, 8);
  EXPECT_EQ(linf_distance(a, b), 0.0);
  EXPECT_GT(linf_distance(a, c), 1e-4);
}

TEST(Generators, TwoPhaseOnConvexBranchesIsIllPrepared) {
  const auto spec = PotentialSpec::builtin("quartic-wrinkle");
  const auto env = compute_convex_envelope(spec);
  const auto f = generate_initial("two-phase", {{"low", 0.05}, {"high", 2.2}}, 256);
  EXPECT_GT(energy_eps(f, 0.01, spec) - energy_star(f, env), 1e-4);
}

TEST(Harness, OutputTimesAndGrid) {
  const auto t = default_output_times(0.5);
  ASSERT_EQ(t.size(), 20u);
  EXPECT_NEAR(t.front(), 5e-4, 1e-15);
  EXPECT_NEAR(t.back(), 0.5, 1e-15);
  for (std::size_t i = 2; i < t.size(); ++i) EXPECT_NEAR(t[i] / t[i - 1], t[1] / t[0], 1e-9);
  EXPECT_EQ(grid_for_eps(64, 0.1), 80u);
  EXPECT_EQ(grid_for_eps(256, 0.1), 256u);
  EXPECT_EQ(grid_for_eps(16, 0.0125), 640u);
}

TEST(Harness, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(RunSingle, LimitOnConstantDataWithManifest) {
  const auto dir = scratch("limit-const");
  auto doc = small_config(dir);
  doc["initial_data"] = {{"name", "uniform"}};
  const auto res = run_single(ExperimentConfig::from_json(doc), RunMode::Limit);
  for (const auto& row : res.audit.rows) EXPECT_NEAR(row.residual, 0.0, 1e-14);
  ASSERT_TRUE(fs::exists(dir / "manifest.json"));
  const auto man = json::parse(slurp(dir / "manifest.json"));
  for (const char* key : {"config", "config_hash", "versions", "outputs"}) EXPECT_TRUE(man.contains(key)) << key;
  EXPECT_EQ(man["config_hash"], sha256_hex(man["config"].dump()));
  EXPECT_EQ(man["outputs"].size(), res.outputs.size());
  for (const auto& o : man["outputs"]) {
    const auto p = dir / o["path"].get<std::string>();
    ASSERT_TRUE(fs::exists(p)) << p;
    EXPECT_EQ(o["sha256"], sha256_file(p.string()));
  }
  EXPECT_TRUE(fs::exists(dir / "trajectory.csv"));
}

TEST(RunSingle, DeterministicOutputs) {
  auto run = [](const std::string& tag) {
    const auto dir = scratch(tag);
    auto doc = small_config(dir);
    doc["initial_data"] = {{"name", "cosine"}, {"amplitude", 0.2}, {"noise", 0.02}};
    doc["seed"] = 42;
    run_single(ExperimentConfig::from_json(doc), RunMode::Eps);
    return slurp(dir / "trajectory.csv");
  };
  const auto a = run("det-a"), b = run("det-b");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
}

TEST(RunSingle, JkoEmitsCrossValidation) {
  const auto dir = scratch("jko");
  auto doc = small_config(dir);
  doc["jko"] = {{"tau", 2.5e-3}, {"m", 128}};
  const auto res = run_single(ExperimentConfig::from_json(doc), RunMode::Jko);
  EXPECT_FALSE(res.crossval.empty());
  EXPECT_FALSE(res.ledger.empty());
  for (const auto& [t, d] : res.crossval) EXPECT_LT(d, 0.05) << t;
  EXPECT_TRUE(fs::exists(dir / "crossval.csv"));
  EXPECT_TRUE(fs::exists(dir / "ledger.csv"));
}

TEST(RunSingle, NonlocalNeedsCubic) {
  const auto dir = scratch("nonlocal");
  auto doc = small_config(dir);
  EXPECT_THROW(run_single(ExperimentConfig::from_json(doc), RunMode::Nonlocal), Error);
  doc["potential"] = "cubic-motivation";
  doc["solver"]["dt"] = 1e-5;
  doc["solver"]["t_end"] = 0.002;
  doc["output_times"] = {0.001, 0.002};
  const auto res = run_single(ExperimentConfig::from_json(doc), RunMode::Nonlocal);
  ASSERT_TRUE(res.comparison.has_value());
  EXPECT_EQ(res.comparison->d2_gap.size(), res.comparison->times.size());
  EXPECT_TRUE(fs::exists(dir / "comparison.csv"));
}

TEST(RunSweep, ConstantDataHasZeroGaps) {
  const auto dir = scratch("sweep-const");
  auto doc = small_config(dir);
  doc["initial_data"] = {{"name", "uniform"}};
  const auto rep = run_sweep(ExperimentConfig::from_json(doc));
  ASSERT_EQ(rep.rows.size(), 2u);
  for (const auto& r : rep.rows) {
    EXPECT_FALSE(r.aborted);
    EXPECT_NEAR(r.sup_t_d2_to_limit, 0.0, 1e-12);
    EXPECT_NEAR(r.slope_gap_L2, 0.0, 1e-20);
    EXPECT_NEAR(r.energy_gap_max, 0.0, 1e-12);
  }
  EXPECT_TRUE(fs::exists(dir / "sweep.csv"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST(RunSweep, RowsAreIsolated) {
  auto doc = small_config(scratch("iso-a"));
  // A base grid finer than 8 / eps keeps every row on the same cells.
  doc["solver"]["n"] = 128;
  doc["initial_data"]["amplitude"] = 0.05;
  doc["threads"] = 2;
  const auto both = run_sweep(ExperimentConfig::from_json(doc), false);
  doc["eps_list"] = {0.1};
  doc["output_dir"] = scratch("iso-b").string();
  const auto one = run_sweep(ExperimentConfig::from_json(doc), false);
  ASSERT_EQ(both.rows.size(), 2u);
  ASSERT_EQ(one.rows.size(), 1u);
  EXPECT_EQ(both.rows[1].sup_t_d2_to_limit, one.rows[0].sup_t_d2_to_limit);
  EXPECT_EQ(both.rows[1].slope_gap_L2, one.rows[0].slope_gap_L2);
  EXPECT_EQ(both.rows[1].energy_gap_final, one.rows[0].energy_gap_final);
}

TEST(RunSweep, IllPreparedDataIsRejected) {
  auto doc = small_config(scratch("ill"));
  doc["potential"] = "quartic-wrinkle";
  doc["initial_data"] = {{"name", "two-phase"}, {"low", 0.05}, {"high", 2.2}};
  EXPECT_THROW(run_sweep(ExperimentConfig::from_json(doc), false), HypothesisViolation);
  doc["allow_ill_prepared"] = true;
  doc["solver"]["t_end"] = 0.002;
  doc["output_times"] = {0.002};
  EXPECT_NO_THROW(run_sweep(ExperimentConfig::from_json(doc), false));
}

#ifdef DCHLAB_CLI
namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(DCHLAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("envelope --potential quartic-spinodal"), 0);
  EXPECT_EQ(cli("validate-potential --potential cubic-motivation"), 0);
  EXPECT_EQ(cli("validate-potential --potential zero"), 2);
  EXPECT_EQ(cli("envelope --potential nonesuch"), 1);
  EXPECT_EQ(cli("frobnicate"), 1);

  const auto dir = scratch("cli");
  auto doc = small_config(dir / "out");
  doc["potential"] = "quartic-wrinkle";
  doc["initial_data"] = {{"name", "two-phase"}, {"low", 0.05}, {"high", 2.2}};
  std::ofstream(dir / "ill.json") << doc.dump();
  EXPECT_EQ(cli("sweep --config " + (dir / "ill.json").string()), 2);

  doc = small_config(dir / "out");
  std::ofstream(dir / "ok.json") << doc.dump();
  EXPECT_EQ(cli("simulate --mode limit --config " + (dir / "ok.json").string()), 0);
  EXPECT_EQ(cli("audit --trajectory " + (dir / "out" / "trajectory.csv").string()), 0);
  EXPECT_EQ(cli("simulate --mode sideways --config " + (dir / "ok.json").string()), 1);
}
#endif
