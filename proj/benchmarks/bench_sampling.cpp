#include <benchmark/benchmark.h>

#include "nestrisk/loss_estimators.hpp"
#include "nestrisk/market_model.hpp"
#include "nestrisk/portfolio.hpp"

namespace {

nestrisk::MarketModel bench_market() {
  nestrisk::MarketModel m;
  nestrisk::NoiseHandle h(99);
  m.assets.resize(16);
  for (auto& a : m.assets) {
    a.initial_price = 90.0 + 20.0 * h.uniform();
    a.drift = 0.05 + 0.1 * h.uniform();
    a.volatility = 0.01 + 0.39 * h.uniform();
  }
  return m;
}

void BM_InnerDrawSubsampled(benchmark::State& state) {
  const auto market = bench_market();
  nestrisk::GenConfig gen;
  gen.count = 1000;
  gen.model_mix = {0.3, 0.7, 0.0};
  const auto portfolio = nestrisk::generate_with_retry(gen, market);
  const nestrisk::LossModel loss(portfolio, market, {},
                                 nestrisk::LevelDistribution::make(1.5), true);
  nestrisk::NoiseHandle root(5);
  nestrisk::NoiseHandle scen_noise = root.derive(0);
  const auto scenario = nestrisk::sample_risk_scenario(market, scen_noise);
  const nestrisk::InnerVariable var(loss, scenario);
  std::uint64_t k = 0;
  for (auto _ : state) {
    nestrisk::NoiseHandle h = root.derive(1, k++);
    benchmark::DoNotOptimize(var.draw(h));
  }
}
BENCHMARK(BM_InnerDrawSubsampled);

void BM_MilsteinLevel(benchmark::State& state) {
  const auto market = bench_market();
  const int level = static_cast<int>(state.range(0));
  nestrisk::NoiseHandle root(17);
  std::uint64_t k = 0;
  for (auto _ : state) {
    nestrisk::NoiseHandle h = root.derive(k++);
    benchmark::DoNotOptimize(
        nestrisk::milstein_terminal_pair(market, 0, 100.0, 2.0, level, h));
  }
}
BENCHMARK(BM_MilsteinLevel)->DenseRange(0, 4);

}  // namespace
