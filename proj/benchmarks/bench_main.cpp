// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "pmodel/verify_harness.hpp"

using namespace pmodel;

namespace {

Scenario bench_scenario(int n, int nodes) {
  Scenario s;
  s.name = "bench";
  s.seed = 3;
  s.spectrum.n = n;
  s.spectrum.t_min = 1.0;
  s.spectrum.t_max = 100.0;
  s.F_norm = 0.3;
  s.quad.nodes = nodes;
  return s;
}

void BM_BuildContour(benchmark::State& st) {
  ParabolicDomain d;
  d.mu = 1.0;
  d.R = 2.68;
  d.weight = WeightFamily::power_affine(0.5, DomainCase::HalfLine);
  const double T = tmax_for_tail(d, 1e-7);
  for (auto _ : st) benchmark::DoNotOptimize(build_contour(d, T, static_cast<int>(st.range(0)), {10.0, 0}));
}
BENCHMARK(BM_BuildContour)->Arg(512)->Arg(2048)->Arg(4096);

void BM_DeltaSamples(benchmark::State& st) {
  const Pipeline p = build_pipeline(bench_scenario(static_cast<int>(st.range(0)), 2048));
  for (auto _ : st) benchmark::DoNotOptimize(p.ev->delta_samples(p.gamma));
}
BENCHMARK(BM_DeltaSamples)->Arg(3)->Arg(16);

void BM_ObservationBatch(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const Pipeline p = build_pipeline(bench_scenario(n, 2048));
  const Mat X = Mat::Identity(n, n);
  for (auto _ : st) benchmark::DoNotOptimize(obs_samples_batch(p.sys.A, p.sys.C(), X, p.gamma.z));
}
BENCHMARK(BM_ObservationBatch)->Arg(3)->Arg(16);

void BM_DeltaPairing(benchmark::State& st) {
  const Pipeline p = build_pipeline(bench_scenario(8, static_cast<int>(st.range(0))));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Vec x(8);
  for (int i = 0; i < 8; ++i) x(i) = cplx(nd(rng), nd(rng));
  const GridFunction f = obs_transform(p.sys, x, p.gamma.z);
  for (auto _ : st) benchmark::DoNotOptimize(delta_pairing(f, f, p.space.delta, p.gamma));
}
BENCHMARK(BM_DeltaPairing)->Arg(1024)->Arg(4096);

void BM_Duality(benchmark::State& st) {
  const Pipeline p = build_pipeline(bench_scenario(3, 2048));
  for (auto _ : st) benchmark::DoNotOptimize(check_duality(p.sys, *p.ev, p.gamma, p.space.delta, 10, 1));
}
BENCHMARK(BM_Duality)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
