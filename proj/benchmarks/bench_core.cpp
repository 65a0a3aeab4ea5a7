#include <benchmark/benchmark.h>

#include <memory>

#include "crl/gscalei.hpp"
#include "crl/harness.hpp"
#include "crl/lscalei.hpp"
#include "crl/metrics.hpp"
#include "crl/scm.hpp"
#include "crl/scores.hpp"

namespace {

using namespace crl;

void BM_SampleLinearEnvironment(benchmark::State& state) {
  Rng rng = make_rng(1);
  const int n = static_cast<int>(state.range(0));
  auto scm = std::make_shared<Scm>(sample_linear_scm(sample_erdos_renyi(n, 0.5, rng), rng));
  EnvModel obs(scm);
  for (auto _ : state) benchmark::DoNotOptimize(obs.sample(10000, rng));
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_SampleLinearEnvironment)->Arg(5)->Arg(8);

void BM_Assignment(benchmark::State& state) {
  Rng rng = make_rng(2);
  const int n = static_cast<int>(state.range(0));
  Mat w = standard_normal_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(max_weight_assignment(w));
}
BENCHMARK(BM_Assignment)->Arg(5)->Arg(20)->Arg(100);

void BM_Mcc(benchmark::State& state) {
  Rng rng = make_rng(3);
  Mat z = standard_normal_matrix(50000, 5, rng);
  Mat zh = z * standard_normal_matrix(5, 5, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mcc(z, zh));
}
BENCHMARK(BM_Mcc)->Unit(benchmark::kMillisecond);

void BM_GaussianScoreDiff(benchmark::State& state) {
  Rng rng = make_rng(4);
  Mat a = standard_normal_matrix(50000, 5, rng), b = standard_normal_matrix(50000, 5, rng);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_score_diff(a, b, a));
}
BENCHMARK(BM_GaussianScoreDiff)->Unit(benchmark::kMillisecond);

void BM_GscaleLossGradient(benchmark::State& state) {
  Rng rng = make_rng(5);
  const int n = 5, d = 100, ns = 200;
  Mat x = (0.5 * standard_normal_matrix(ns, d, rng)).array().tanh();
  std::vector<Mat> diffs;
  for (int m = 0; m < n; ++m) diffs.push_back(standard_normal_matrix(ns, d, rng));
  Mat h = 0.1 * standard_normal_matrix(n, d, rng);
  gscalei::Config cfg;
  Mat grad;
  for (auto _ : state) benchmark::DoNotOptimize(gscalei::loss(h, diffs, x, cfg, true, &grad));
}
BENCHMARK(BM_GscaleLossGradient)->Unit(benchmark::kMillisecond);

void BM_LinearHardPipeline(benchmark::State& state) {
  harness::ExperimentConfig c;
  c.n = 5;
  c.d = 100;
  c.n_s = static_cast<int>(state.range(0));
  c.seed = 2024;
  int g = 0;
  for (auto _ : state) benchmark::DoNotOptimize(harness::run_single(c, g++));
}
BENCHMARK(BM_LinearHardPipeline)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
