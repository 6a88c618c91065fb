// Serial reference vs OpenMP kernel for each data-parallel hot path. The
// thread count is the benchmark argument for the parallel variants.

#include <benchmark/benchmark.h>

#include "caliblab/experiments.hpp"
#include "caliblab/forecasters.hpp"
#include "caliblab/measures.hpp"
#include "caliblab/opt_search.hpp"
#include "caliblab/parallel.hpp"

using namespace caliblab;

namespace {

Transcript fixed_transcript(std::size_t T) {
  RngStream rng(42, 0);
  return random_transcript(T, rng);
}

void BM_SsceExactSerial(benchmark::State& state) {
  const Transcript t = fixed_transcript(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ssce_exact_serial(t).value);
}

void BM_SsceExactParallel(benchmark::State& state) {
  const Transcript t = fixed_transcript(static_cast<std::size_t>(state.range(0)));
  set_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(ssce_exact(t).value);
  set_threads(1);
}

void BM_SsceMcSerial(benchmark::State& state) {
  const Transcript t = fixed_transcript(200);
  for (auto _ : state) {
    RngStream rng(1, 0);
    benchmark::DoNotOptimize(ssce_mc_serial(t, 20000, rng).value);
  }
}

void BM_SsceMcParallel(benchmark::State& state) {
  const Transcript t = fixed_transcript(200);
  set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    RngStream rng(1, 0);
    benchmark::DoNotOptimize(ssce_mc(t, 20000, rng).value);
  }
  set_threads(1);
}

void BM_ExpectedMeasureSerial(benchmark::State& state) {
  RngStream rng(7, 0);
  const auto d = gen_random_tree(14, rng);
  const Forecaster a = truthful(d);
  const MeasureFn m = measure_fn("smce");
  for (auto _ : state) benchmark::DoNotOptimize(expected_measure_serial(d, a, m));
}

void BM_ExpectedMeasureParallel(benchmark::State& state) {
  RngStream rng(7, 0);
  const auto d = gen_random_tree(14, rng);
  const Forecaster a = truthful(d);
  const MeasureFn m = measure_fn("smce");
  set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(expected_measure(d, a, m));
  set_threads(1);
}

void BM_MonteCarloReps(benchmark::State& state) {
  const auto d = gen_halfhalf(2000);
  const Forecaster a = ucal_strategic();
  const MeasureFn m = measure_fn("ucal");
  set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    RngStream rng(3, 0);
    benchmark::DoNotOptimize(mc_expected_measure(d, a, m, 500, rng).mean);
  }
  set_threads(1);
}

void BM_OptBruteForce(benchmark::State& state) {
  const auto d = OutcomeDistribution::product({0.5, 0.3});
  const GridSpec g{{0.0, 0.25, 0.5, 0.75, 1.0}};
  const MeasureFn m = measure_fn("ssce");
  for (auto _ : state) benchmark::DoNotOptimize(opt_exact_bruteforce(d, m, g).value);
}

void BM_OptExpectimin(benchmark::State& state) {
  const auto d = OutcomeDistribution::product({0.5, 0.3});
  const GridSpec g{{0.0, 0.25, 0.5, 0.75, 1.0}};
  const MeasureFn m = measure_fn("ssce");
  set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(opt_exact(d, m, g).value);
  set_threads(1);
}

void BM_OptExpectiminT4(benchmark::State& state) {
  RngStream rng(9, 0);
  const GridSpec g{{0.0, 0.25, 0.5, 0.75, 1.0}};
  const auto d = gen_random_tree(4, rng, g);
  const MeasureFn m = measure_fn("ssce");
  set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(opt_exact(d, m, g).value);
  set_threads(1);
}

}  // namespace

BENCHMARK(BM_SsceExactSerial)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SsceExactParallel)->ArgsProduct({{12, 16}, {1, 2, 4}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SsceMcSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SsceMcParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExpectedMeasureSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExpectedMeasureParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloReps)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OptBruteForce)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OptExpectimin)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OptExpectiminT4)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
