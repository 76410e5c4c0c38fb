#include <gtest/gtest.h>

#include <omp.h>

#include <random>

#include "athena/kernels.hpp"
#include "test_util.hpp"

using namespace athena;
using namespace athena::linalg;

namespace {

SparseMatrix random_sparse(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (rng() % 5 == 0) t.push_back({i, j, d(rng)});
  return SparseMatrix::from_triplets(rows, cols, t);
}

std::vector<double> identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return v;
}

// Column-major A^T A off-diagonal, normalised.
double max_normalized_offdiag(const std::vector<double>& cols, std::size_t rows, std::size_t n) {
  double worst = 0.0;
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = p + 1; q < n; ++q) {
      double dpq = 0, dp = 0, dq = 0;
      for (std::size_t r = 0; r < rows; ++r) {
        dpq += cols[p * rows + r] * cols[q * rows + r];
        dp += cols[p * rows + r] * cols[p * rows + r];
        dq += cols[q * rows + r] * cols[q * rows + r];
      }
      if (dp > 0 && dq > 0) worst = std::max(worst, std::abs(dpq) / std::sqrt(dp * dq));
    }
  return worst;
}

}  // namespace

TEST(Kernels, SpmvMatchesReference) {
  auto m = random_sparse(50, 30, 1);
  std::vector<double> x(30);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * static_cast<double>(i) - 1.0;
  std::vector<double> a(50), b(50);
  kernels::spmv(m, x, a);
  kernels::reference::spmv(m, x, b);
  EXPECT_EQ(a, b);
}

TEST(Kernels, PredictRowMatchesReference) {
  auto vt = test::random_dense(7, 40, 2);
  std::vector<double> su{0.5, -1, 2, 0.25, 3, -0.5, 1};
  std::vector<double> a(40), b(40);
  kernels::predict_row(su, vt, 1.25, a);
  kernels::reference::predict_row(su, vt, 1.25, b);
  EXPECT_EQ(a, b);
}

TEST(Kernels, CosineScanMatchesReference) {
  std::mt19937_64 rng(3);
  std::vector<SparseVector> rows(60);
  std::vector<double> sq(60);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::uint32_t c = 0; c < 25; ++c)
      if (rng() % 3 == 0) {
        rows[r].indices.push_back(c);
        rows[r].values.push_back(static_cast<double>(1 + rng() % 7));
      }
    sq[r] = squared_norm(rows[r]);
  }
  const auto& q = rows[7];
  std::vector<double> a(60), b(60);
  kernels::cosine_scan(q, squared_norm(q), rows, sq, a);
  kernels::reference::cosine_scan(q, squared_norm(q), rows, sq, b);
  EXPECT_EQ(a, b);
  EXPECT_DOUBLE_EQ(a[7], 1.0);
}

TEST(Kernels, JacobiBothOrderingsOrthogonalize) {
  const std::size_t rows = 20, n = 15;
  auto d = test::random_dense(rows, n, 4);
  std::vector<double> cols(rows * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t r = 0; r < rows; ++r) cols[j * rows + r] = d(r, j);
  auto par = cols, ref = cols;
  auto vp = identity(n), vr = identity(n);
  const double tol = 1e-15 * rows;
  auto sp = kernels::jacobi_orthogonalize(par, rows, n, vp, 100, tol);
  auto sr = kernels::reference::jacobi_orthogonalize(ref, rows, n, vr, 100, tol);
  EXPECT_LE(sp, 100u);
  EXPECT_LE(sr, 100u);
  EXPECT_LT(max_normalized_offdiag(par, rows, n), 1e-12);
  EXPECT_LT(max_normalized_offdiag(ref, rows, n), 1e-12);

  // Same column norms up to ordering: they are the singular values.
  auto norms = [&](const std::vector<double>& c) {
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t r = 0; r < rows; ++r) s += c[j * rows + r] * c[j * rows + r];
      out[j] = std::sqrt(s);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  auto a = norms(par), b = norms(ref);
  for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(a[j], b[j], 1e-12 * a.back());
}

TEST(Kernels, JacobiIndependentOfThreadCount) {
  const std::size_t rows = 30, n = 12;
  auto d = test::random_dense(rows, n, 5);
  std::vector<double> cols(rows * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t r = 0; r < rows; ++r) cols[j * rows + r] = d(r, j);
  const int saved = omp_get_max_threads();
  std::vector<std::vector<double>> results;
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    auto c = cols;
    auto v = identity(n);
    kernels::jacobi_orthogonalize(c, rows, n, v, 100, 1e-15 * rows);
    c.insert(c.end(), v.begin(), v.end());
    results.push_back(std::move(c));
  }
  omp_set_num_threads(saved);
  EXPECT_EQ(results[0], results[1]);
  EXPECT_EQ(results[0], results[2]);
}

TEST(Kernels, JacobiReportsNonConvergence) {
  const std::size_t rows = 10, n = 8;
  auto d = test::random_dense(rows, n, 6);
  std::vector<double> cols(rows * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t r = 0; r < rows; ++r) cols[j * rows + r] = d(r, j);
  auto v = identity(n);
  EXPECT_EQ(kernels::jacobi_orthogonalize(cols, rows, n, v, 1, 1e-15), 2u);
}
