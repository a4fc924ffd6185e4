// Parallel (OpenMP) kernels against their serial references.
#include <benchmark/benchmark.h>

#include <random>

#include "cir/kernels.hpp"
#include "cir/random.hpp"

namespace {

cir::EmbeddingMatrix random_rows(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  cir::Rng rng(seed);
  std::normal_distribution<double> g;
  std::vector<cir::UnitEmbedding> out;
  out.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> v(dim);
    for (double& x : v) x = g(rng);
    out.push_back(cir::normalize_span(std::span<const double>(v)));
  }
  return cir::EmbeddingMatrix::from_rows(out);
}

void BM_ScoresParallel(benchmark::State& state) {
  const auto gallery = random_rows(static_cast<std::size_t>(state.range(0)), 256, 1);
  const auto q = gallery.row(0);
  for (auto _ : state) benchmark::DoNotOptimize(cir::kernels::scores(gallery, q));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoresSerial(benchmark::State& state) {
  const auto gallery = random_rows(static_cast<std::size_t>(state.range(0)), 256, 1);
  const auto q = gallery.row(0);
  for (auto _ : state) benchmark::DoNotOptimize(cir::kernels::serial::scores(gallery, q));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GramParallel(benchmark::State& state) {
  const auto m = random_rows(static_cast<std::size_t>(state.range(0)), 128, 2);
  for (auto _ : state) benchmark::DoNotOptimize(cir::kernels::gram(m, m));
}

void BM_GramSerial(benchmark::State& state) {
  const auto m = random_rows(static_cast<std::size_t>(state.range(0)), 128, 2);
  for (auto _ : state) benchmark::DoNotOptimize(cir::kernels::serial::gram(m, m));
}

void BM_ArgmaxParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = random_rows(n, 32, 3);
  const auto sims = cir::kernels::serial::gram(m, m);
  for (auto _ : state) benchmark::DoNotOptimize(cir::kernels::argmax_off_diagonal(sims, n));
}

void BM_ArgmaxSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = random_rows(n, 32, 3);
  const auto sims = cir::kernels::serial::gram(m, m);
  for (auto _ : state) benchmark::DoNotOptimize(cir::kernels::serial::argmax_off_diagonal(sims, n));
}

BENCHMARK(BM_ScoresParallel)->Arg(1 << 12)->Arg(1 << 16)->UseRealTime();
BENCHMARK(BM_ScoresSerial)->Arg(1 << 12)->Arg(1 << 16)->UseRealTime();
BENCHMARK(BM_GramParallel)->Arg(64)->Arg(512)->UseRealTime();
BENCHMARK(BM_GramSerial)->Arg(64)->Arg(512)->UseRealTime();
BENCHMARK(BM_ArgmaxParallel)->Arg(256)->Arg(2048)->UseRealTime();
BENCHMARK(BM_ArgmaxSerial)->Arg(256)->Arg(2048)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
