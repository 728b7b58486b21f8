// Serial reference vs blocked/OpenMP kernels on shapes from the desk model
// (d_model 128, 32 rows x 128 context, vocabulary ~700).
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "relsem/kernels.hpp"

namespace k = relsem::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

template <k::Backend B>
void BM_Gemm(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  const int N = static_cast<int>(state.range(1));
  const int K = static_cast<int>(state.range(2));
  const bool tb = state.range(3) != 0;
  const auto a = random_vec(static_cast<std::size_t>(M) * K, 1);
  const auto b = random_vec(static_cast<std::size_t>(K) * N, 2);
  std::vector<float> c(static_cast<std::size_t>(M) * N);
  k::BackendScope scope(B);
  for (auto _ : state) {
    k::gemm(false, tb, M, N, K, 1.0f, a.data(), K, b.data(), tb ? K : N, 0.0f, c.data(), N);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * M * N * K, benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}

// Weight-gradient shape: op(A) = X^T, contraction over the token rows.
template <k::Backend B>
void BM_GemmTA(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  const int N = static_cast<int>(state.range(1));
  const int K = static_cast<int>(state.range(2));
  const auto a = random_vec(static_cast<std::size_t>(K) * M, 1);
  const auto b = random_vec(static_cast<std::size_t>(K) * N, 2);
  std::vector<float> c(static_cast<std::size_t>(M) * N);
  k::BackendScope scope(B);
  for (auto _ : state) {
    k::gemm(true, false, M, N, K, 1.0f, a.data(), M, b.data(), N, 1.0f, c.data(), N);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * M * N * K, benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}

template <k::Backend B>
void BM_Softmax(benchmark::State& state) {
  const auto rows = state.range(0);
  const int cols = static_cast<int>(state.range(1));
  const auto x = random_vec(static_cast<std::size_t>(rows * cols), 3);
  std::vector<float> y(x.size());
  k::BackendScope scope(B);
  for (auto _ : state) {
    k::softmax_rows(x.data(), y.data(), rows, cols);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * rows * cols);
}

template <k::Backend B>
void BM_LayerNorm(benchmark::State& state) {
  const auto rows = state.range(0);
  const int cols = static_cast<int>(state.range(1));
  const auto x = random_vec(static_cast<std::size_t>(rows * cols), 4);
  const std::vector<float> gamma(static_cast<std::size_t>(cols), 1.0f), beta(static_cast<std::size_t>(cols), 0.0f);
  std::vector<float> y(x.size()), mean(static_cast<std::size_t>(rows)), rstd(static_cast<std::size_t>(rows));
  k::BackendScope scope(B);
  for (auto _ : state) {
    k::layernorm(x.data(), gamma.data(), beta.data(), y.data(), mean.data(), rstd.data(), rows, cols, 1e-5f);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * rows * cols);
}

template <k::Backend B>
void BM_AdamW(benchmark::State& state) {
  const auto n = state.range(0);
  auto w = random_vec(static_cast<std::size_t>(n), 5);
  const auto g = random_vec(static_cast<std::size_t>(n), 6);
  std::vector<float> m(w.size()), v(w.size());
  k::BackendScope scope(B);
  for (auto _ : state) {
    k::adamw(w.data(), g.data(), m.data(), v.data(), n, 1e-3f, 0.9f, 0.95f, 1e-8f, 0.1f, 0.1f, 0.05f);
    benchmark::DoNotOptimize(w.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

void gemm_shapes(benchmark::internal::Benchmark* b) {
  b->Args({4096, 384, 128, 0})   // qkv projection
      ->Args({4096, 512, 128, 0})  // mlp up
      ->Args({4096, 128, 512, 0})  // mlp down
      ->Args({4096, 704, 128, 1})  // tied head
      ->Args({128, 128, 32, 1})    // attention scores, one head
      ->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_Gemm<k::Backend::Serial>)->Apply(gemm_shapes);
BENCHMARK(BM_Gemm<k::Backend::Parallel>)->Apply(gemm_shapes);
BENCHMARK(BM_GemmTA<k::Backend::Serial>)->Args({128, 384, 4096})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GemmTA<k::Backend::Parallel>)->Args({128, 384, 4096})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Softmax<k::Backend::Serial>)->Args({4096, 704})->Args({16384, 128});
BENCHMARK(BM_Softmax<k::Backend::Parallel>)->Args({4096, 704})->Args({16384, 128});
BENCHMARK(BM_LayerNorm<k::Backend::Serial>)->Args({4096, 128});
BENCHMARK(BM_LayerNorm<k::Backend::Parallel>)->Args({4096, 128});

BENCHMARK(BM_AdamW<k::Backend::Serial>)->Arg(1 << 19);
BENCHMARK(BM_AdamW<k::Backend::Parallel>)->Arg(1 << 19);

BENCHMARK_MAIN();
