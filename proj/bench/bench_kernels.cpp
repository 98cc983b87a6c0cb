// Serial reference versus OpenMP kernels on synthetic layers.
#include "hmtm/kernels.hpp"
#include "hmtm/rng.hpp"

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

using namespace hmtm;

namespace {

struct Problem {
  std::vector<Matrix> layers;
  std::vector<Matrix> U;
  Matrix V;
  std::vector<int> states;
  std::vector<int> all;
  Vector weights;
};

Problem make_problem(int N, int T, int M = 3, int R = 2) {
  Rng rng(42);
  Problem p;
  for (int t = 0; t < T; ++t) {
    Matrix L = Matrix::Zero(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j) L(i, j) = L(j, i) = rng.uniform() < 0.2 ? 1.0 : 0.0;
    p.layers.push_back(L);
  }
  for (int m = 0; m < M; ++m) {
    Matrix U(N, R);
    for (int i = 0; i < N; ++i)
      for (int r = 0; r < R; ++r) U(i, r) = rng.normal();
    p.U.push_back(U);
  }
  p.V = Matrix(T, R);
  for (int t = 0; t < T; ++t)
    for (int r = 0; r < R; ++r) p.V(t, r) = rng.normal();
  for (int t = 0; t < T; ++t) p.states.push_back(t * M / T);
  p.all.resize(T);
  std::iota(p.all.begin(), p.all.end(), 0);
  p.weights = Vector::Ones(T);
  return p;
}

template <bool Parallel>
void BM_regime_ssr(benchmark::State& st) {
  const Problem p = make_problem(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  for (auto _ : st) {
    Matrix out = Parallel ? kernels::parallel::regime_ssr(p.layers, p.U, p.V, 0.1)
                          : kernels::serial::regime_ssr(p.layers, p.U, p.V, 0.1);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_accumulate_lu(benchmark::State& st) {
  const Problem p = make_problem(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  for (auto _ : st) {
    Matrix out = Parallel ? kernels::parallel::accumulate_lu(p.layers, p.all, p.U[0], p.V, p.weights, 0.1)
                          : kernels::serial::accumulate_lu(p.layers, p.all, p.U[0], p.V, p.weights, 0.1);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_accumulate_lv(benchmark::State& st) {
  const Problem p = make_problem(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  for (auto _ : st) {
    Matrix out = Parallel ? kernels::parallel::accumulate_lv(p.layers, p.all, p.U[0], 0.1)
                          : kernels::serial::accumulate_lv(p.layers, p.all, p.U[0], 0.1);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_correct_layers(benchmark::State& st) {
  const Problem p = make_problem(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  for (auto _ : st) {
    NullModel nm;
    nm.kind = NullModelKind::PrincipalEigen;
    std::vector<Matrix> out;
    if (Parallel)
      kernels::parallel::correct_layers(p.layers, nm, out);
    else
      kernels::serial::correct_layers(p.layers, nm, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void sizes(benchmark::internal::Benchmark* b) {
  b->Args({10, 40})->Args({50, 100})->Args({150, 200})->Unit(benchmark::kMicrosecond)->UseRealTime();
}

}  // namespace

BENCHMARK(BM_regime_ssr<false>)->Name("regime_ssr/serial")->Apply(sizes);
BENCHMARK(BM_regime_ssr<true>)->Name("regime_ssr/parallel")->Apply(sizes);
BENCHMARK(BM_accumulate_lu<false>)->Name("accumulate_lu/serial")->Apply(sizes);
BENCHMARK(BM_accumulate_lu<true>)->Name("accumulate_lu/parallel")->Apply(sizes);
BENCHMARK(BM_accumulate_lv<false>)->Name("accumulate_lv/serial")->Apply(sizes);
BENCHMARK(BM_accumulate_lv<true>)->Name("accumulate_lv/parallel")->Apply(sizes);
BENCHMARK(BM_correct_layers<false>)->Name("correct_layers/serial")->Apply(sizes);
BENCHMARK(BM_correct_layers<true>)->Name("correct_layers/parallel")->Apply(sizes);

BENCHMARK_MAIN();
