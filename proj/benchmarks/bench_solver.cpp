#include "mcar/ice.hpp"
#include "mcar/solver.hpp"
#include "mcar/synth.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

mcar::Matrix gaussian(mcar::Index rows, mcar::Index cols) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  mcar::Matrix out(rows, cols);
  for (mcar::Index j = 0; j < cols; ++j)
    for (mcar::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

mcar::AmbiguousDataset dataset(int samples_per_class) {
  const auto spec = mcar::synth::ConvexHullSpec::uniform(5, 4, samples_per_class, 40, 3);
  const auto gen = mcar::synth::gen_convex_hull_data(spec);
  const auto sets = mcar::synth::synthesize_ambiguity(gen.ground_truth, 5, {0.9, 2, 0.25, 4});
  return mcar::synth::make_dataset(gen, sets, 5);
}

void BM_Svt(benchmark::State& state) {
  const auto n = static_cast<mcar::Index>(state.range(0));
  const auto a = gaussian(45, n);
  for (auto _ : state) benchmark::DoNotOptimize(mcar::svt(a, 1.0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Svt)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_McarSolve(benchmark::State& state) {
  const auto ds = dataset(static_cast<int>(state.range(0)));
  const auto p = mcar::init_soft_labels(ds.candidates, 5);
  const auto cfg = mcar::SolverConfig::defaults_for(ds);
  for (auto _ : state) benchmark::DoNotOptimize(mcar::mcar_solve(ds, p, cfg));
  state.counters["instances"] = static_cast<double>(ds.num_instances());
}
BENCHMARK(BM_McarSolve)->Arg(20)->Arg(40)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_WmcarIce(benchmark::State& state) {
  const auto ds = dataset(static_cast<int>(state.range(0)));
  mcar::ice::IceConfig cfg;
  cfg.solver = mcar::SolverConfig::defaults_for(ds);
  for (auto _ : state) benchmark::DoNotOptimize(mcar::ice::wmcar_ice(ds, cfg));
}
BENCHMARK(BM_WmcarIce)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
