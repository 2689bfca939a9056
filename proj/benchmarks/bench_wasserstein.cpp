#include <benchmark/benchmark.h>

#include <cmath>

#include "dchlab/wasserstein.hpp"

using namespace dchlab;

namespace {

DensityField bump(std::size_t n, double centre) {
  return DensityField::from_function(n, [=](double x) {
    double d = x - centre;
    d -= std::round(d);
    return 0.2 + std::exp(-d * d / 0.005);
  });
}

}  // namespace

static void BM_W2Periodic(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = bump(n, 0.2), b = bump(n, 0.7);
  for (auto _ : state) benchmark::DoNotOptimize(w2_periodic(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_W2Periodic)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

static void BM_ToQuantiles(benchmark::State& state) {
  const auto f = bump(1024, 0.3);
  const auto m = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(to_quantiles(f, m));
}
BENCHMARK(BM_ToQuantiles)->Arg(256)->Arg(1024)->Arg(4096);
