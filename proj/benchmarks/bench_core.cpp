#include <benchmark/benchmark.h>

#include <random>

#include "egur/featurestore.hpp"
#include "egur/local_evidence.hpp"
#include "egur/metrics.hpp"
#include "egur/pipeline.hpp"
#include "egur/residual.hpp"

namespace {

using namespace egur;

store::SyntheticSpec bench_spec(std::uint32_t per_class) {
  store::SyntheticSpec spec;
  spec.known_classes = 10;
  spec.train_per_class = per_class;
  spec.calib_per_class = per_class / 4;
  spec.test_per_class = per_class / 4;
  spec.dim = 64;
  spec.id_dim = 24;
  spec.seed = 1;
  return spec;
}

void BM_LocalEvidence(benchmark::State& state) {
  const auto ds = store::generate_synthetic(bench_spec(static_cast<std::uint32_t>(state.range(0))));
  const auto& train = ds.packs.at("known_train");
  const auto index = local::fit_class_index(store::to_matrix(train, true), train.labels, 10, 5, 10, true);
  auto thresholds = local::calibrate_support_thresholds(index);
  const auto queries = store::to_matrix(ds.packs.at("known_test"), false);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto ev = local::evaluate(queries.row(i % queries.rows()), 0, index, thresholds);
    benchmark::DoNotOptimize(ev.r_local);
    ++i;
  }
  state.SetLabel(std::to_string(index.features.rows()) + " train rows");
}
BENCHMARK(BM_LocalEvidence)->Arg(40)->Arg(200);

void BM_ResidualNorm(benchmark::State& state) {
  const auto ds = store::generate_synthetic(bench_spec(100));
  const auto x = store::to_matrix(ds.packs.at("known_train"), true);
  const auto sub = residual::fit_subspace(x, {0.9, static_cast<std::size_t>(state.range(0))});
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(residual::residual_norm(x.row(i % x.rows()), sub));
    ++i;
  }
}
BENCHMARK(BM_ResidualNorm)->Arg(8)->Arg(32);

void BM_SubspaceFit(benchmark::State& state) {
  const auto ds = store::generate_synthetic(bench_spec(static_cast<std::uint32_t>(state.range(0))));
  const auto x = store::to_matrix(ds.packs.at("known_train"), true);
  for (auto _ : state) benchmark::DoNotOptimize(residual::fit_subspace(x).rank);
}
BENCHMARK(BM_SubspaceFit)->Arg(40)->Arg(200);

void BM_Auroc(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<double> known(static_cast<std::size_t>(state.range(0))), unknown(known.size());
  for (double& v : known) v = normal(rng) + 1.0;
  for (double& v : unknown) v = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::auroc(known, unknown));
}
BENCHMARK(BM_Auroc)->Arg(1000)->Arg(100000);

void BM_FitPipeline(benchmark::State& state) {
  const auto ds = store::generate_synthetic(bench_spec(60));
  PipelineConfig config;
  config.probe.epochs = 100;
  for (auto _ : state) {
    const auto model = fit_model(ds.packs.at("known_train"), ds.packs.at("known_calib"), config);
    benchmark::DoNotOptimize(model.operating_point.threshold);
  }
}
BENCHMARK(BM_FitPipeline)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
