#include <benchmark/benchmark.h>

#include <vector>

#include "agrisk/distributions.hpp"
#include "agrisk/inference.hpp"
#include "agrisk/oracle.hpp"
#include "agrisk/risk.hpp"
#include "agrisk/smc.hpp"

namespace {

const agrisk::ParameterVector kTruth = agrisk::ParameterVector::shared(0.1, 0.03, -0.3, -0.15, 0.02, -0.01, 0.02);

void BM_LogLikelihood(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto panel = agrisk::oracle::make_recovery_panel(agrisk::VariantKind::HierVariance, kTruth, k, 60, 1);
  const agrisk::MarxTarget target(panel.data, agrisk::VariantKind::HierVariance);
  const auto natural = target.layout().pack(panel.truth);
  const auto working = target.layout().to_working(natural);
  for (auto _ : state) benchmark::DoNotOptimize(target.log_likelihood(working));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(target.observation_count()));
}
BENCHMARK(BM_LogLikelihood)->Arg(10)->Arg(50)->Arg(133);

void BM_WeightedQuantile(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  agrisk::Rng rng = agrisk::make_rng(2, "bench-quantile");
  std::vector<double> v(n), w(n, 1.0 / static_cast<double>(n));
  for (double& x : v) x = agrisk::dist::sample_normal(rng, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(agrisk::weighted_quantile(v, w, 0.025));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_WeightedQuantile)->RangeMultiplier(10)->Range(1000, 1000000)->Complexity(benchmark::oNLogN);

void BM_ConjugateSmc(benchmark::State& state) {
  const agrisk::oracle::ConjugateTarget target(agrisk::oracle::default_conjugate_fixtures().back());
  agrisk::smc::SmcConfig config;
  config.n_particles = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(agrisk::smc::run_smc(target, config).log_evidence);
}
BENCHMARK(BM_ConjugateSmc)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_PanelFit(benchmark::State& state) {
  const auto panel = agrisk::oracle::make_recovery_panel(agrisk::VariantKind::HierVariance, kTruth, 10, 60, 3);
  agrisk::smc::SmcConfig config;
  config.n_particles = 300;
  for (auto _ : state) benchmark::DoNotOptimize(agrisk::fit(panel.data, agrisk::VariantKind::HierVariance, config));
}
BENCHMARK(BM_PanelFit)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace

BENCHMARK_MAIN();
