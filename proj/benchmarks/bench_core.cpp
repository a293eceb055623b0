#include <benchmark/benchmark.h>

#include "mcox/coxph.hpp"
#include "mcox/moments.hpp"
#include "mcox/pipeline.hpp"
#include "mcox/simulation.hpp"
#include "mcox/subsampling.hpp"

namespace {

using namespace mcox;

Dataset dataset(std::size_t n, CovariateKind kind) {
  DgpConfig cfg;
  cfg.n = n;
  cfg.covariate = kind;
  cfg.seed = 1;
  return generate_dataset(cfg);
}

void BM_PartialLikelihood(benchmark::State& state) {
  const auto kind = state.range(1) ? CovariateKind::TimeDependent : CovariateKind::TimeIndependent;
  const Dataset ds = dataset(static_cast<std::size_t>(state.range(0)), kind);
  const Eigen::VectorXd beta = default_beta0();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_partial_likelihood(ds, beta));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PartialLikelihood)->Args({10000, 0})->Args({100000, 0})->Args({1000, 1})->Args({4000, 1});

void BM_NewtonRaphson(benchmark::State& state) {
  const Dataset ds = dataset(static_cast<std::size_t>(state.range(0)), CovariateKind::TimeIndependent);
  for (auto _ : state) benchmark::DoNotOptimize(newton_raphson_fit(ds));
}
BENCHMARK(BM_NewtonRaphson)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_PoissonSubsample(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const SubsamplePlan plan = SubsamplePlan::make(n, 1000, 7);
  for (auto _ : state) benchmark::DoNotOptimize(poisson_subsample(n, plan));
}
BENCHMARK(BM_PoissonSubsample)->Arg(100000)->Arg(1000000);

void BM_OptimalMomentPass(benchmark::State& state) {
  const Dataset ds = dataset(static_cast<std::size_t>(state.range(0)), CovariateKind::TimeIndependent);
  const SubsamplePlan plan = SubsamplePlan::make(ds.n(), 1000, 3);
  const Dataset pilot = subset(ds, poisson_subsample(ds.n(), plan.pilot(ds.n())));
  const MomentSpec spec = build_optimal_moment(pilot, default_beta0());
  for (auto _ : state) benchmark::DoNotOptimize(whole_data_mean(ds, spec));
}
BENCHMARK(BM_OptimalMomentPass)->Arg(100000)->Arg(400000)->Unit(benchmark::kMillisecond);

void BM_McoxPipeline(benchmark::State& state) {
  const Dataset ds = dataset(static_cast<std::size_t>(state.range(0)), CovariateKind::TimeIndependent);
  PipelineOptions options;
  options.r = static_cast<double>(state.range(1));
  options.moment = state.range(2) ? MomentChoice::aft() : MomentChoice::optimal();
  for (auto _ : state) benchmark::DoNotOptimize(run_mcox(ds, options));
}
BENCHMARK(BM_McoxPipeline)
    ->Args({100000, 500, 0})
    ->Args({100000, 500, 1})
    ->Args({100000, 2000, 0})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
