// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include <random>

#include "athena/kernels.hpp"

using namespace athena;
using linalg::SparseMatrix;
using linalg::SparseVector;

namespace {

SparseMatrix random_sparse(std::size_t rows, std::size_t cols, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), val(1.0, 5.0);
  std::vector<linalg::Triplet> t;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (u(rng) < density) t.push_back({i, j, val(rng)});
  return SparseMatrix::from_triplets(rows, cols, t);
}

std::vector<double> random_columns(std::size_t rows, std::size_t ncols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> out(rows * ncols);
  for (auto& x : out) x = d(rng);
  return out;
}

template <auto Kernel>
void BM_Jacobi(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto base = random_columns(2 * n, n, 1);
  for (auto _ : state) {
    auto cols = base;
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    benchmark::DoNotOptimize(Kernel(cols, 2 * n, n, v, 60, 1e-15));
  }
}

template <auto Kernel>
void BM_Spmv(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = random_sparse(n, n, 0.03, 2);
  std::vector<double> x(n, 1.0), y(n);
  for (auto _ : state) {
    Kernel(m, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m.nnz()));
}

template <auto Kernel>
void BM_PredictRow(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 20;
  linalg::DenseMatrix vt(k, n);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto& x : vt.data()) x = d(rng);
  std::vector<double> su(k, 0.5), out(n);
  for (auto _ : state) {
    Kernel(su, vt, 1.0, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Kernel>
void BM_CosineScan(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::vector<SparseVector> rows(n);
  std::vector<double> sq(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::uint32_t c = 0; c < 2000; ++c)
      if (rng() % 100 == 0) {
        rows[r].indices.push_back(c);
        rows[r].values.push_back(1.0 + static_cast<double>(rng() % 5));
      }
    sq[r] = linalg::squared_norm(rows[r]);
  }
  std::vector<double> out(n);
  for (auto _ : state) {
    Kernel(rows[0], sq[0], rows, sq, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_Jacobi<kernels::jacobi_orthogonalize>)->Name("jacobi/parallel")->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Jacobi<kernels::reference::jacobi_orthogonalize>)->Name("jacobi/reference")->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Spmv<kernels::spmv>)->Name("spmv/parallel")->Arg(2000)->Arg(8000);
BENCHMARK(BM_Spmv<kernels::reference::spmv>)->Name("spmv/reference")->Arg(2000)->Arg(8000);
BENCHMARK(BM_PredictRow<kernels::predict_row>)->Name("predict_row/parallel")->Arg(5000)->Arg(50000);
BENCHMARK(BM_PredictRow<kernels::reference::predict_row>)->Name("predict_row/reference")->Arg(5000)->Arg(50000);
BENCHMARK(BM_CosineScan<kernels::cosine_scan>)->Name("cosine_scan/parallel")->Arg(1000)->Arg(10000);
BENCHMARK(BM_CosineScan<kernels::reference::cosine_scan>)->Name("cosine_scan/reference")->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
