// Kronecker product timings: serial and OpenMP matrix-free kernels, the
// dense assembled product, and one FISTA iteration's worth of work.
//
//   ./build/bench/bench_kron --benchmark_filter=20x200

#include <benchmark/benchmark.h>

#include <random>

#include "sparsecps/bench.hpp"
#include "sparsecps/kron_ops.hpp"

using namespace sparsecps;

namespace {

LeadField random_leadfield(Index m, Index n) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  LeadField lf;
  lf.entries.resize(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) lf.entries(i, j) = normal(rng);
  return lf;
}

Eigen::VectorXd random_vector(Index size) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(size);
  for (Index i = 0; i < size; ++i) v[i] = normal(rng);
  return v;
}

void matrix_free(benchmark::State& state, Execution exec) {
  const Index m = state.range(0), n = state.range(1);
  const KronOperator op(random_leadfield(m, n));
  const Eigen::VectorXd x = random_vector(n * n);
  Eigen::VectorXd y(m * m), back(n * n);
  KronWorkspace ws;
  for (auto _ : state) {
    op.apply({x.data(), static_cast<std::size_t>(x.size())}, {y.data(), static_cast<std::size_t>(y.size())}, ws, exec);
    op.apply_transpose({y.data(), static_cast<std::size_t>(y.size())},
                       {back.data(), static_cast<std::size_t>(back.size())}, ws, exec);
    benchmark::DoNotOptimize(back.data());
  }
  state.counters["bytes_per_iter"] = static_cast<double>(8 * (n * n + m * m + 2 * m * n));
}

void serial(benchmark::State& state) { matrix_free(state, Execution::serial); }
void parallel(benchmark::State& state) { matrix_free(state, Execution::parallel); }

void dense_multiply(benchmark::State& state) {
  const Index m = state.range(0), n = state.range(1);
  const Eigen::MatrixXd k = bench::assemble_kron(random_leadfield(m, n).entries);
  const Eigen::VectorXd x = random_vector(n * n);
  Eigen::VectorXd y(m * m), back(n * n);
  for (auto _ : state) {
    y.noalias() = k * x;
    back.noalias() = k.transpose() * y;
    benchmark::DoNotOptimize(back.data());
  }
  state.counters["matrix_bytes"] = static_cast<double>(k.size() * 8);
}

void dense_assemble(benchmark::State& state) {
  const Eigen::MatrixXd g = random_leadfield(state.range(0), state.range(1)).entries;
  for (auto _ : state) {
    Eigen::MatrixXd k = bench::assemble_kron(g);
    benchmark::DoNotOptimize(k.data());
  }
}

void sizes(benchmark::internal::Benchmark* b) {
  b->Args({8, 32})->Args({20, 200})->Args({30, 100})->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(serial)->Apply(sizes)->Name("matrix_free_serial");
BENCHMARK(parallel)->Apply(sizes)->Name("matrix_free_parallel");
BENCHMARK(dense_multiply)->Apply(sizes);
BENCHMARK(dense_assemble)->Apply(sizes);
BENCHMARK_MAIN();
