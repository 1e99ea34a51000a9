#include <benchmark/benchmark.h>

#include "pwiser/loss.hpp"
#include "pwiser/rng.hpp"

using namespace pwiser;

namespace {

ScenarioPartition make_partition(std::size_t n) {
  Rng rng(1234 + n);
  auto draw = [&](std::size_t k) {
    std::vector<double> v(k);
    for (auto& x : v) x = rng.uniform(1e-6, 1.0 - 1e-6);
    return v;
  };
  return ScenarioPartition::from_groups(draw(n), draw(n), draw(n));
}

void BM_PwiserNaive(benchmark::State& state) {
  auto part = make_partition(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto r = pwiser_naive(part, 0.3, 0.3);
    benchmark::DoNotOptimize(r.value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PwiserNaive)->RangeMultiplier(2)->Range(256, 8192)->Complexity();

void BM_PwiserFast(benchmark::State& state) {
  auto part = make_partition(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto r = pwiser_fast(part, 0.3, 0.3);
    benchmark::DoNotOptimize(r.value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PwiserFast)->RangeMultiplier(2)->Range(256, 131072)->Complexity();

void BM_Bce(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(99);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform(1e-6, 1.0 - 1e-6);
    labels[i] = rng.bernoulli(0.1) ? 1 : 0;
  }
  for (auto _ : state) {
    auto r = bce(scores, labels);
    benchmark::DoNotOptimize(r.value);
  }
}
BENCHMARK(BM_Bce)->Range(2048, 131072);

}  // namespace

BENCHMARK_MAIN();
