// Serial vs OpenMP kernels at sizes the training and evaluation loops hit.
// Set OMP_NUM_THREADS to compare thread counts.
#include <benchmark/benchmark.h>

#include <vector>

#include "hypernoise/kernels.hpp"
#include "hypernoise/rng.hpp"

using namespace hypernoise;

namespace {

template <auto Fn>
void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = rng.normal_matrix(n, 64), b = rng.normal_matrix(64, 64);
  std::vector<double> c(n * 64);
  for (auto _ : state) {
    Fn(a.data(), b.data(), c, n, 64, 64);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * 64 * 64));
}

template <auto Fn>
void bm_knn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor x = rng.normal_matrix(n, 12);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x, x, 5, true));
}

template <auto Fn>
void bm_pairwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const Tensor x = rng.normal_matrix(n, 12);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x));
}

}  // namespace

BENCHMARK(bm_matmul<kernels::serial::matmul>)->Arg(256)->Arg(4096);
BENCHMARK(bm_matmul<kernels::omp::matmul>)->Arg(256)->Arg(4096);
BENCHMARK(bm_knn<kernels::serial::kth_neighbor_distances>)->Arg(1000)->Arg(4000);
BENCHMARK(bm_knn<kernels::omp::kth_neighbor_distances>)->Arg(1000)->Arg(4000);
BENCHMARK(bm_pairwise<kernels::serial::pairwise_distances>)->Arg(256)->Arg(2000);
BENCHMARK(bm_pairwise<kernels::omp::pairwise_distances>)->Arg(256)->Arg(2000);
BENCHMARK_MAIN();
