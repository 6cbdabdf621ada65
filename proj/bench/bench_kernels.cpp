// Serial reference vs OpenMP kernels on a sentence-sized workload.

#include <benchmark/benchmark.h>

#include <random>

#include "claimgraph/kernels.hpp"
#include "claimgraph/model.hpp"

using namespace claimgraph;

namespace {

struct Workload {
  Matrix h;
  std::vector<Span> spans;
  std::vector<double> w;
  Matrix x;
  Matrix weight;
  std::vector<double> bias;
};

Workload make_workload(std::size_t tokens, std::size_t dim) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal;
  Workload wl;
  wl.h = Matrix(tokens, dim);
  for (auto& v : wl.h.data) v = normal(rng);
  wl.spans = enumerate_spans(tokens, 20);
  wl.w.resize(dim);
  for (auto& v : wl.w) v = normal(rng);
  wl.x = Matrix(wl.spans.size(), 2 * dim + kWidthDim);
  for (auto& v : wl.x.data) v = normal(rng);
  wl.weight = Matrix(7, wl.x.cols);
  for (auto& v : wl.weight.data) v = normal(rng);
  wl.bias.assign(7, 0.1);
  return wl;
}

const Workload& workload(std::int64_t tokens) {
  static Workload small = make_workload(30, 768);
  static Workload large = make_workload(80, 768);
  return tokens <= 30 ? small : large;
}

template <auto Fn>
void BM_attention(benchmark::State& state) {
  const Workload& wl = workload(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(wl.h, wl.spans, wl.w, 0.0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(wl.spans.size()));
}

template <auto Fn>
void BM_maxpool(benchmark::State& state) {
  const Workload& wl = workload(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(wl.h, wl.spans));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(wl.spans.size()));
}

template <auto Fn>
void BM_linear(benchmark::State& state) {
  const Workload& wl = workload(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(wl.x, wl.weight, wl.bias));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(wl.x.rows));
}

}  // namespace

BENCHMARK(BM_attention<kernels::serial::attention_pool>)->Name("attention/serial")->Arg(30)->Arg(80);
BENCHMARK(BM_attention<kernels::omp::attention_pool>)->Name("attention/omp")->Arg(30)->Arg(80);
BENCHMARK(BM_maxpool<kernels::serial::max_pool>)->Name("maxpool/serial")->Arg(30)->Arg(80);
BENCHMARK(BM_maxpool<kernels::omp::max_pool>)->Name("maxpool/omp")->Arg(30)->Arg(80);
BENCHMARK(BM_linear<kernels::serial::linear>)->Name("linear/serial")->Arg(30)->Arg(80);
BENCHMARK(BM_linear<kernels::omp::linear>)->Name("linear/omp")->Arg(30)->Arg(80);

BENCHMARK_MAIN();
