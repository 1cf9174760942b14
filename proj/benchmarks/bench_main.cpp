#include <algorithm>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "towerdebias/debias.hpp"
#include "towerdebias/metrics.hpp"
#include "towerdebias/neighbors.hpp"
#include "towerdebias/theory.hpp"

namespace {

tdb::RowMatrix random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(n * d);
  for (auto& x : v) x = z(rng);
  return {n, d, std::move(v)};
}

std::vector<tdb::Neighbor> scan(const tdb::RowMatrix& points, std::span<const double> q,
                                std::size_t k) {
  std::vector<tdb::Neighbor> all(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    all[i] = {tdb::squared_distance(points.row(i), q), i};
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    tdb::closer);
  all.resize(k);
  return all;
}

void BM_KdTreeKnn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const tdb::KdTree tree(random_points(n, d, 1));
  const auto queries = random_points(256, d, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree.knn(queries.row(i++ % 256), 25));
  }
}
BENCHMARK(BM_KdTreeKnn)->ArgsProduct({{1000, 20000, 100000}, {2, 5, 8}});

void BM_BruteForceKnn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const auto points = random_points(n, d, 1);
  const auto queries = random_points(256, d, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(scan(points, queries.row(i++ % 256), 25));
  }
}
BENCHMARK(BM_BruteForceKnn)->ArgsProduct({{1000, 20000, 100000}, {2, 5, 8}});

void BM_DebiasPredict(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto spec = tdb::theory::random_spec(3, 11);
  const auto reference = tdb::theory::sample(spec, n, 12);
  const auto queries = tdb::theory::sample(spec, 1000, 13);
  const auto& y = reference.column("y").values;
  const auto index = tdb::DebiasIndex::build(reference, y);
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.predict(queries, {.k = 25}));
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_DebiasPredict)->Arg(2000)->Arg(20000)->Arg(200000)->Unit(benchmark::kMillisecond);

void BM_Pearson(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = random_points(n, 2, 3);
  std::vector<double> u(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = m(i, 0);
    v[i] = m(i, 1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(tdb::pearson(u, v));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Pearson)->Arg(1000)->Arg(1000000);

}  // namespace

BENCHMARK_MAIN();
