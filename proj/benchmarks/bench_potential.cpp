#include <benchmark/benchmark.h>

#include "dchlab/potential.hpp"

using namespace dchlab;

static void BM_ConvexEnvelope(benchmark::State& state) {
  const auto spec = PotentialSpec::builtin("quartic-wrinkle");
  const auto samples = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(compute_convex_envelope(spec, samples));
}
BENCHMARK(BM_ConvexEnvelope)->RangeMultiplier(4)->Range(1024, 65536)->Unit(benchmark::kMicrosecond);

static void BM_UnstableSet(benchmark::State& state) {
  const auto spec = PotentialSpec::builtin("cubic-motivation");
  const auto env = compute_convex_envelope(spec);
  for (auto _ : state) benchmark::DoNotOptimize(compute_unstable_set(spec, env));
}
BENCHMARK(BM_UnstableSet);

BENCHMARK_MAIN();
