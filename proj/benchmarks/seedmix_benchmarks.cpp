#include <benchmark/benchmark.h>

#include "seedmix/datagen.hpp"
#include "seedmix/forecast.hpp"
#include "seedmix/optimizer.hpp"
#include "seedmix/pipeline.hpp"
#include "seedmix/random.hpp"

namespace {

using namespace seedmix;

const GeneratedData& data() {
  static const GeneratedData d = generate(GenConfig{});
  return d;
}

void BM_OptimizeSubregion(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::vector<VarietyStats> stats;
  for (std::size_t i = 0; i < k; ++i) {
    stats.push_back(VarietyStats{VarietyId{"V" + std::to_string(i)}, rng.uniform(20, 70), rng.uniform(1, 40)});
  }
  normalize_stats(stats);
  for (auto _ : state) benchmark::DoNotOptimize(optimize_subregion(stats, 0.5));
}
BENCHMARK(BM_OptimizeSubregion)->Arg(5)->Arg(10);

void BM_TauSweep(benchmark::State& state) {
  Rng rng(2);
  std::vector<VarietyStats> stats;
  for (int i = 0; i < 10; ++i) {
    stats.push_back(VarietyStats{VarietyId{"V" + std::to_string(i)}, rng.uniform(20, 70), rng.uniform(1, 40)});
  }
  normalize_stats(stats);
  for (auto _ : state) benchmark::DoNotOptimize(tau_sweep(stats));
}
BENCHMARK(BM_TauSweep);

void BM_ForestTraining(benchmark::State& state) {
  const auto& records = data().catalog.experiments;
  std::vector<double> yields;
  for (const auto& r : records) yields.push_back(r.yield);
  const BinScheme scheme = fit_bins(yields, 20);
  ForestConfig cfg;
  cfg.n_trees = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(train_forest(records, scheme, cfg));
}
BENCHMARK(BM_ForestTraining)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_ForecastEpoch(benchmark::State& state) {
  const auto pairs = make_sequences(data().catalog.sub_regions, 0, 2015);
  TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(pairs, cfg));
}
BENCHMARK(BM_ForecastEpoch)->Unit(benchmark::kMillisecond);

void BM_BuildAtlas(benchmark::State& state) {
  const PipelineConfig config;
  const auto models = train_forecast_models(data().catalog.sub_regions, config);
  const auto forest = train_yield_model(data().catalog, config);
  for (auto _ : state) benchmark::DoNotOptimize(build_atlas(data().catalog, models, forest, config));
}
BENCHMARK(BM_BuildAtlas)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
