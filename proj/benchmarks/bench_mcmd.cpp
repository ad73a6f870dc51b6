#include "glsmul/datagen.hpp"
#include "glsmul/embedding.hpp"
#include "glsmul/label_shift.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

using namespace glsmul;

struct Pair {
  CmeOperator source;
  CmeOperator target;
};

Pair make_pair(Index m) {
  GlsScenario sc = named_scenario("g1", 0);
  sc.n_source = m;
  sc.n_target = m;
  const GlsSample s = synth_gls(sc);
  const KernelSpec k = KernelSpec::gaussian(1.0);
  return {fit_cme(s.source.features, *s.source.labels, 3, k, k, 1e-3),
          fit_cme(s.target.features, s.target_oracle, 3, k, k, 1e-3)};
}

const std::vector<int> kQueries = {0, 1, 2};

void BM_McmdNaive(benchmark::State& state) {
  const Pair p = make_pair(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        mcmd_squared_cross_matrix(p.source, p.target, kQueries, kQueries, InversePath::naive));
  }
  state.SetComplexityN(state.range(0));
}

void BM_McmdWoodbury(benchmark::State& state) {
  const Pair p = make_pair(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        mcmd_squared_cross_matrix(p.source, p.target, kQueries, kQueries, InversePath::woodbury));
  }
  state.SetComplexityN(state.range(0));
}

void BM_McmdRff(benchmark::State& state) {
  const Pair p = make_pair(state.range(0));
  const RffProjection proj = rff_build(2, state.range(1), 1.0, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mcmd_squared_cross_matrix_rff(p.source, p.target, kQueries, kQueries, proj));
  }
  state.SetComplexityN(state.range(0));
}

void BM_FitCme(benchmark::State& state) {
  const Index m = state.range(0);
  GlsScenario sc = named_scenario("g1", 0);
  sc.n_source = m;
  sc.n_target = 1;
  const GlsSample s = synth_gls(sc);
  const KernelSpec k = KernelSpec::gaussian(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(fit_cme(s.source.features, *s.source.labels, 3, k, k, 1e-3));
  state.SetComplexityN(m);
}

void BM_Bbse(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Vector p_s = Vector::Constant(c, 1.0 / c);
  Matrix conf = Matrix::Constant(c, c, 0.02 / c);
  conf.diagonal() = p_s * 0.98;
  Vector w = Vector::LinSpaced(c, 0.2, 1.8);
  w /= w.dot(p_s);
  const Vector q = conf * w;
  for (auto _ : state) benchmark::DoNotOptimize(bbse_solve(q, conf, p_s));
}

}  // namespace

BENCHMARK(BM_McmdNaive)->RangeMultiplier(2)->Range(250, 1000)->Unit(benchmark::kMillisecond)->Complexity();
BENCHMARK(BM_McmdWoodbury)->RangeMultiplier(2)->Range(250, 4000)->Unit(benchmark::kMillisecond)->Complexity();
BENCHMARK(BM_McmdRff)->ArgsProduct({{1000, 4000, 16000}, {128, 512}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FitCme)->RangeMultiplier(4)->Range(1000, 64000)->Unit(benchmark::kMicrosecond)->Complexity();
BENCHMARK(BM_Bbse)->Arg(3)->Arg(12)->Arg(65);

BENCHMARK_MAIN();
