// Serial reference loops vs the OpenMP kernels, plus one encoder pass at the
// training batch shape. Run with OMP_NUM_THREADS to vary the thread count.

#include <benchmark/benchmark.h>

#include <random>

#include "unsee/encoder/encoder.hpp"
#include "unsee/numerics/kernels.hpp"

using namespace unsee;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (double& v : m.values()) v = n(gen);
  return m;
}

template <Matrix (*Fn)(const Matrix&, const Matrix&)>
void bm_matmul_tn(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const Matrix x = random_matrix(b, d, 1), y = random_matrix(b, d, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x, y));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(b * d * d));
}

template <Matrix (*Fn)(const Matrix&, const Matrix&, double)>
void bm_centered(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const Matrix x = random_matrix(b, d, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x, x, static_cast<double>(b - 1)));
}

void bm_encode_eval(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  RngStream rng(0, "init");
  const EncoderParams p = init_encoder({500, 32, true, 0.1, 64, 1.0}, rng);
  std::mt19937_64 gen(4);
  std::vector<TokenRow> batch;
  for (std::size_t r = 0; r < rows; ++r) {
    TokenRow row{std::vector<TokenId>(64, Vocab::kPad), std::vector<std::uint8_t>(64, 0)};
    const std::size_t len = 5 + gen() % 16;
    for (std::size_t t = 0; t < len; ++t) {
      row.ids[t] = static_cast<TokenId>(2 + gen() % 498);
      row.mask[t] = 1;
    }
    batch.push_back(row);
  }
  const TokenBatch tb = make_batch(batch);
  for (auto _ : state) benchmark::DoNotOptimize(encode_eval(p, tb));
}

}  // namespace

BENCHMARK(bm_matmul_tn<kernels::reference::matmul_tn>)->Args({32, 32})->Args({400, 32})->Args({4000, 64});
BENCHMARK(bm_matmul_tn<kernels::matmul_tn>)->Args({32, 32})->Args({400, 32})->Args({4000, 64});
BENCHMARK(bm_centered<kernels::reference::centered_cross_product>)->Args({32, 32})->Args({400, 32});
BENCHMARK(bm_centered<kernels::centered_cross_product>)->Args({32, 32})->Args({400, 32});
BENCHMARK(bm_encode_eval)->Arg(32)->Arg(400);

BENCHMARK_MAIN();
