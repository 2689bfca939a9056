#include <benchmark/benchmark.h>

#include <cmath>

#include "dchlab/nonlocal.hpp"
#include "dchlab/solvers.hpp"

using namespace dchlab;

namespace {

DensityField wave(std::size_t n) {
  return DensityField::from_function(n, [](double x) { return 1.0 + 0.3 * std::cos(6.283185307179586 * x); });
}

}  // namespace

static void BM_StepEps(benchmark::State& state) {
  const auto spec = PotentialSpec::builtin("quartic-spinodal");
  SolverConfig cfg;
  cfg.n = static_cast<std::size_t>(state.range(0));
  cfg.eps = 0.05;
  cfg.dt = 1e-5;
  const auto f = wave(cfg.n);
  for (auto _ : state) benchmark::DoNotOptimize(step_eps(f, cfg, spec));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_StepEps)->RangeMultiplier(2)->Range(128, 2048)->Complexity()->Unit(benchmark::kMicrosecond);

static void BM_StepLimit(benchmark::State& state) {
  const auto env = compute_convex_envelope(PotentialSpec::builtin("quartic-spinodal"));
  SolverConfig cfg;
  cfg.n = static_cast<std::size_t>(state.range(0));
  cfg.dt = 1e-4;
  const auto f = wave(cfg.n);
  for (auto _ : state) benchmark::DoNotOptimize(step_limit(f, cfg, env));
}
BENCHMARK(BM_StepLimit)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);

static void BM_StepNonlocal(benchmark::State& state) {
  const auto kern = bump_kernel();
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto f = wave(n);
  const auto method = state.range(1) ? ConvolutionMethod::Spectral : ConvolutionMethod::Direct;
  for (auto _ : state) benchmark::DoNotOptimize(step_nonlocal(f, 1e-6, 0.1, kern, method));
}
BENCHMARK(BM_StepNonlocal)->Args({256, 0})->Args({256, 1})->Args({1024, 0})->Args({1024, 1})
    ->Unit(benchmark::kMicrosecond);
