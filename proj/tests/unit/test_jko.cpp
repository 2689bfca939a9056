#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dchlab/functionals.hpp"
#include "dchlab/jko.hpp"
#include "dchlab/solvers.hpp"

using namespace dchlab;

namespace {

constexpr double kTwoPi = 6.283185307179586;

DensityField wave(std::size_t n, double a, int k = 1) {
  return DensityField::from_function(n, [=](double x) { return 1.0 + a * std::cos(kTwoPi * k * x); });
}

JkoConfig small_cfg(double tau, std::size_t m = 256) {
  JkoConfig c;
  c.tau = tau;
  c.m = m;
  return c;
}

}  // namespace

TEST(JkoConfig, Validation) {
  JkoConfig c;
  EXPECT_NO_THROW(c.validate());
  c.m = 32;
  EXPECT_THROW(c.validate(), ConfigError);
  c = JkoConfig{};
  c.tau = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(jko_inner_solver_from_string("lbfgs"), JkoInnerSolver::Lbfgs);
  EXPECT_EQ(to_string(JkoInnerSolver::Newton), "newton");
  EXPECT_THROW(jko_inner_solver_from_string("cg"), ConfigError);
  EXPECT_DOUBLE_EQ(JkoConfig{}.bandwidth(), 2.0 / 512);
}

TEST(Reconstruction, UnitMassAndNonNegative) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QuantileRepr x;
  for (int i = 0; i < 100; ++i) x.positions.push_back(u(rng) * 0.3 + 0.8);
  std::sort(x.positions.begin(), x.positions.end());
  const auto f = reconstruct_density(x, 64, 0.02);
  EXPECT_NEAR(f.mass(), 1.0, 1e-12);
  EXPECT_GE(f.min(), 0.0);
}

TEST(Reconstruction, PullbackMatchesFiniteDifferences) {
  const auto x = to_quantiles(wave(64, 0.4), 80);
  const std::size_t n = 64;
  const double bw = 0.03;
  std::vector<double> c(n);
  for (std::size_t j = 0; j < n; ++j) c[j] = std::sin(0.37 * j) + 0.1 * j;
  auto energy = [&](const QuantileRepr& q) {
    const auto f = reconstruct_density(q, n, bw);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += c[j] * f[j];
    return s;
  };
  const auto g = reconstruct_pullback(x, n, bw, c);
  for (std::size_t i : {0u, 17u, 40u, 79u}) {
    auto p = x, q = x;
    p.positions[i] += 1e-6;
    q.positions[i] -= 1e-6;
    EXPECT_NEAR(g[i], (energy(p) - energy(q)) / 2e-6, 1e-5 * (1.0 + std::abs(g[i]))) << i;
  }
}

TEST(JkoStep, UniformIsFixedPointForConvexPotential) {
  const auto spec = PotentialSpec::builtin("quartic-convex");
  const auto u = DensityField::uniform(128);
  const auto v = jko_step(u, small_cfg(1e-2), 0.05, spec);
  EXPECT_LT(w2_periodic(u, v), 1e-6);
}

TEST(JkoStep, DisplacementScalesWithTau) {
  const auto spec = PotentialSpec::builtin("cubic-motivation");
  const auto f = wave(128, 0.3);
  double prev = 0.0;
  for (double tau : {2e-3, 1e-3, 5e-4}) {
    const double d = w2_periodic(f, jko_step(f, small_cfg(tau), 0.1, spec));
    if (prev > 0.0) {
      EXPECT_GE(prev / d, 1.6) << tau;
      EXPECT_LE(prev / d, 2.4) << tau;
    }
    prev = d;
  }
}

TEST(JkoMinimize, NeverWorseThanStayingAndDissipates) {
  const auto spec = PotentialSpec::builtin("quartic-wrinkle");
  const auto f = wave(128, 0.5, 2);
  const auto cfg = small_cfg(1e-3);
  const auto res = jko_minimize(to_quantiles(f, cfg.m), cfg.tau, 128, cfg, 0.05, spec);
  EXPECT_TRUE(res.converged);
  EXPECT_LE(res.objective, res.initial_objective);
  EXPECT_LE(res.energy + res.transport_cost / (2.0 * cfg.tau), res.initial_energy + 2.0 * cfg.inner_tol);
  for (std::size_t i = 1; i < res.particles.m(); ++i) EXPECT_GT(res.particles.positions[i], res.particles.positions[i - 1]);
  EXPECT_NEAR(res.density.mass(), 1.0, 1e-12);
  EXPECT_GE(res.density.min(), 0.0);
}

TEST(JkoMinimize, LbfgsReachesTheSameMinimiser) {
  const auto spec = PotentialSpec::builtin("quartic-spinodal");
  auto cfg = small_cfg(1e-3, 128);
  cfg.inner_tol = 1e-7;
  const auto q = to_quantiles(wave(64, 0.3), cfg.m);
  const auto a = jko_minimize(q, cfg.tau, 64, cfg, 0.2, spec);
  cfg.inner_solver = JkoInnerSolver::Lbfgs;
  const auto b = jko_minimize(q, cfg.tau, 64, cfg, 0.2, spec);
  EXPECT_LT(w2_particles(a.particles, b.particles), 1e-5);
  EXPECT_NEAR(a.objective, b.objective, 1e-8 * (1.0 + std::abs(a.objective)));
}

TEST(JkoMinimize, IterationCapRaisesWithBestIterate) {
  const auto spec = PotentialSpec::builtin("quartic-spinodal");
  auto cfg = small_cfg(1e-2, 128);
  cfg.inner_max = 1;
  cfg.inner_tol = 1e-14;
  try {
    jko_minimize(to_quantiles(wave(64, 0.5), cfg.m), cfg.tau, 64, cfg, 0.1, spec);
    FAIL() << "expected a convergence failure";
  } catch (const JkoConvergenceFailure& e) {
    EXPECT_LE(e.best().objective, e.best().initial_objective);
  }
}

TEST(DeGiorgi, LimitsAndMonotoneEnergy) {
  const auto spec = PotentialSpec::builtin("cubic-motivation");
  const auto f = wave(128, 0.4);
  const auto cfg = small_cfg(2e-3);
  const double eps = 0.1;
  // Small steps return the reconstruction of the unmoved particles.
  const auto still = reconstruct_density(to_quantiles(f, cfg.m), f.size(), cfg.bandwidth(), cfg.kernel_cutoff);
  EXPECT_LT(w2_periodic(de_giorgi_interpolant(f, 1e-9, cfg, eps, spec), still), 1e-7);
  const auto full = jko_step(f, cfg, eps, spec);
  EXPECT_LT(w2_periodic(de_giorgi_interpolant(f, cfg.tau, cfg, eps, spec), full), 1e-10);
  double prev = energy_eps(f, eps, spec);
  for (double frac : {0.1, 0.3, 0.6, 1.0}) {
    const double e = energy_eps(de_giorgi_interpolant(f, frac * cfg.tau, cfg, eps, spec), eps, spec);
    EXPECT_LE(e, prev + 1e-10) << frac;
    prev = e;
  }
  EXPECT_THROW(de_giorgi_interpolant(f, 2.0 * cfg.tau, cfg, eps, spec), InvalidInput);
}

TEST(SimulateJko, ConstantDataHasZeroSlack) {
  const auto spec = PotentialSpec::builtin("quartic-convex");
  const auto run = simulate_jko(DensityField::uniform(64), small_cfg(1e-2, 128), 0.1, spec, 0.05);
  ASSERT_FALSE(run.ledger.empty());
  for (const auto& row : run.ledger) {
    EXPECT_NEAR(row.slack, 0.0, 1e-12);
    EXPECT_NEAR(row.d2_increment, 0.0, 1e-8);
  }
  EXPECT_EQ(run.trajectory.flow, "jko");
}

TEST(SimulateJko, LedgerAndEnergyDecrease) {
  const auto spec = PotentialSpec::builtin("quartic-spinodal");
  const auto run = simulate_jko(wave(128, 0.2), small_cfg(1e-3), 0.1, spec, 0.01);
  ASSERT_EQ(run.ledger.size(), 10u);
  double prev = run.trajectory.reports.front().e_eps;
  for (const auto& row : run.ledger) {
    EXPECT_LE(row.energy, prev + 1e-12);
    EXPECT_GE(row.slack, -1e-12);
    prev = row.energy;
  }
  EXPECT_NEAR(run.trajectory.times.back(), 0.01, 1e-12);
  const auto& p = run.final_particles.positions;
  for (std::size_t i = 1; i < p.size(); ++i) EXPECT_GT(p[i], p[i - 1]);
  EXPECT_LT(p.back() - p.front(), 1.0);
}

TEST(SimulateJko, SlackSettlesAsInnerToleranceShrinks) {
  const auto spec = PotentialSpec::builtin("quartic-spinodal");
  const auto f = wave(64, 0.2);
  auto slack = [&](double tol) {
    auto cfg = small_cfg(2e-3, 128);
    cfg.inner_tol = tol;
    cfg.inner_solver = JkoInnerSolver::Lbfgs;
    const auto run = simulate_jko(f, cfg, 0.1, spec, 4e-3);
    return std::abs(run.ledger.back().slack - simulate_jko(f, small_cfg(2e-3, 128), 0.1, spec, 4e-3).ledger.back().slack);
  };
  EXPECT_LT(slack(1e-8), slack(1e-5) + 1e-14);
}

TEST(SimulateJko, AgreesWithFiniteDifferenceSolver) {
  const auto spec = PotentialSpec::builtin("cubic-motivation");
  const double eps = 0.1, t = 0.01;
  const auto f0 = wave(128, 0.3);
  SolverConfig sc;
  sc.n = 128;
  sc.eps = eps;
  sc.dt = 1e-5;
  sc.t_end = t;
  const auto ref = simulate_eps(f0, sc, spec).snapshots.back();
  double prev = 1e9;
  for (double tau : {2.5e-3, 1.25e-3}) {
    const auto run = simulate_jko(f0, small_cfg(tau, 512), eps, spec, t);
    const double d = w2_periodic(run.trajectory.snapshots.back(), ref);
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, 5e-3);
}
