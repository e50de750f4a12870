#include <benchmark/benchmark.h>

#include "ftsim/pauli.hpp"
#include "ftsim/rng.hpp"

namespace {

void BM_RngU64(benchmark::State& state) {
  ftsim::Rng rng(12345);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rng.next_u64());
  }
}
BENCHMARK(BM_RngU64);

void BM_Depolarize2q(benchmark::State& state) {
  ftsim::Rng rng(12345);
  ftsim::PauliBits a, b;
  for (auto _ : state) {
    ftsim::depolarize_2q(a, b, 0.01, rng);
    benchmark::DoNotOptimize(a);
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_Depolarize2q);

}  // namespace

BENCHMARK_MAIN();
