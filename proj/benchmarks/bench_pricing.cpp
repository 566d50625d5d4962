#include <benchmark/benchmark.h>

#include "nestrisk/pricing.hpp"
#include "nestrisk/rng.hpp"

namespace {

void BM_BsPriceDelta(benchmark::State& state) {
  const nestrisk::VanillaOption opt{nestrisk::OptionKind::Call, 100.0, 2.0, 0};
  double spot = 95.0;
  for (auto _ : state) {
    auto pd = nestrisk::bs_price_delta(opt, spot, 0.02, 0.2, 0.05);
    benchmark::DoNotOptimize(pd);
    spot = 95.0 + (spot > 105.0 ? -10.0 : 1e-3);
  }
}
BENCHMARK(BM_BsPriceDelta);

void BM_InverseNormalCdf(benchmark::State& state) {
  nestrisk::NoiseHandle h(1);
  for (auto _ : state) benchmark::DoNotOptimize(h.normal());
}
BENCHMARK(BM_InverseNormalCdf);

}  // namespace

BENCHMARK_MAIN();
