#include <benchmark/benchmark.h>

#include <cmath>

#include "dchlab/jko.hpp"

using namespace dchlab;

static void BM_JkoMinimize(benchmark::State& state) {
  const auto spec = PotentialSpec::builtin("cubic-motivation");
  JkoConfig cfg;
  cfg.m = static_cast<std::size_t>(state.range(0));
  cfg.tau = 1e-3;
  cfg.inner_solver = state.range(1) ? JkoInnerSolver::Lbfgs : JkoInnerSolver::Newton;
  const auto f = DensityField::from_function(128, [](double x) { return 1.0 + 0.3 * std::cos(6.283185307179586 * x); });
  const auto q = to_quantiles(f, cfg.m);
  for (auto _ : state) benchmark::DoNotOptimize(jko_minimize(q, cfg.tau, f.size(), cfg, 0.1, spec));
}
BENCHMARK(BM_JkoMinimize)->Args({128, 0})->Args({512, 0})->Args({128, 1})->Unit(benchmark::kMillisecond);

static void BM_Reconstruct(benchmark::State& state) {
  const auto f = DensityField::from_function(256, [](double x) { return 1.0 + 0.3 * std::cos(6.283185307179586 * x); });
  const auto q = to_quantiles(f, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct_density(q, 256, 2.0 / 512));
}
BENCHMARK(BM_Reconstruct)->Arg(256)->Arg(1024);
