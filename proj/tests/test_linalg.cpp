#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "athena/error.hpp"
#include "athena/linalg.hpp"
#include "test_util.hpp"

using namespace athena;
using namespace athena::linalg;

TEST(SparseMatrix, FromTripletsSumsDuplicatesAndDropsZeros) {
  auto m = SparseMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 2, 1.5}, {0, 0, 1.0}, {0, 0, -1.0}});
  EXPECT_EQ(m.nnz(), 2u);
  EXPECT_DOUBLE_EQ(m.at(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(m.at(1, 2), 2.5);
  EXPECT_DOUBLE_EQ(m.at(0, 0), 0.0);
  EXPECT_NO_THROW(m.validate());
}

TEST(SparseMatrix, RejectsOutOfRangeAndNonFinite) {
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), IndexError);
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{0, 0, std::nan("")}}), ValidationError);
}

TEST(SparseMatrix, DenseRoundTripAndTranspose) {
  auto d = test::random_dense(4, 5, 3);
  d(1, 1) = 0.0;
  auto s = SparseMatrix::from_dense(d);
  EXPECT_EQ(s.to_dense(), d);
  EXPECT_EQ(s.nnz(), 19u);
  auto t = s.transposed();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(t.at(j, i), d(i, j));
}

TEST(MeanCenter, ConstantRowBecomesZerosWithMean) {
  auto m = SparseMatrix::from_triplets(1, 4, {{0, 0, 3}, {0, 2, 3}, {0, 3, 3}});
  auto c = mean_center_rows(m);
  EXPECT_DOUBLE_EQ(c.row_means[0], 3.0);
  ASSERT_EQ(c.centered.row_values(0).size(), 3u);
  for (double v : c.centered.row_values(0)) EXPECT_EQ(v, 0.0);
}

TEST(MeanCenter, EmptyRowKeepsZeroMean) {
  auto m = SparseMatrix::from_triplets(2, 2, {{1, 0, 4}});
  auto c = mean_center_rows(m);
  EXPECT_EQ(c.row_means[0], 0.0);
  EXPECT_TRUE(c.centered.row_indices(0).empty());
}

TEST(MeanCenter, HandArithmetic) {
  auto m = SparseMatrix::from_triplets(1, 3, {{0, 0, 1}, {0, 2, 5}});
  auto c = mean_center_rows(m);
  EXPECT_DOUBLE_EQ(c.row_means[0], 3.0);
  EXPECT_DOUBLE_EQ(c.centered.at(0, 0), -2.0);
  EXPECT_DOUBLE_EQ(c.centered.at(0, 2), 2.0);
}

TEST(MeanCenter, AddingMeansBackIsExactForEventWeights) {
  // Interaction entries are small integers (sums of 1s and 3s capped at 5).
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 9; ++j)
        if (rng() % 3 == 0) t.push_back({i, j, static_cast<double>(1 + rng() % 5)});
    auto m = SparseMatrix::from_triplets(6, 9, t);
    auto c = mean_center_rows(m);
    for (std::size_t i = 0; i < 6; ++i) {
      auto idx = m.row_indices(i);
      ASSERT_EQ(c.centered.row_indices(i).size(), idx.size());
      for (std::size_t p = 0; p < idx.size(); ++p)
        EXPECT_EQ(c.centered.row_values(i)[p] + c.row_means[i], m.row_values(i)[p]);
    }
  }
}

TEST(MeanCenter, AddingMeansBackOnRandomRealsWithinRounding) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 15; ++j)
      if (rng() % 2) t.push_back({i, j, d(rng)});
  auto m = SparseMatrix::from_triplets(20, 15, t);
  auto c = mean_center_rows(m);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t p = 0; p < m.row_values(i).size(); ++p)
      EXPECT_NEAR(c.centered.row_values(i)[p] + c.row_means[i], m.row_values(i)[p], 4e-15 * 10);
}

TEST(Svd, TwoByTwoCharacteristicPolynomial) {
  auto m = SparseMatrix::from_triplets(2, 2, {{0, 0, 3}, {1, 0, 4}, {1, 1, 5}});
  auto f = truncated_svd(m, 2);
  ASSERT_EQ(f.rank(), 2u);
  EXPECT_NEAR(f.sigma[0], std::sqrt(45.0), 1e-9);
  EXPECT_NEAR(f.sigma[1], std::sqrt(5.0), 1e-9);
}

TEST(Svd, IdentityHasUnitSingularValues) {
  auto m = SparseMatrix::from_triplets(3, 3, {{0, 0, 1}, {1, 1, 1}, {2, 2, 1}});
  auto f = truncated_svd(m, 3);
  for (double s : f.sigma) EXPECT_NEAR(s, 1.0, 1e-12);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(predict_entry(f, i, j), i == j ? 1.0 : 0.0, 1e-9);
}

TEST(Svd, RankOneExact) {
  const std::vector<double> u{1, -2, 3, 0.5}, v{2, 1, -1};
  DenseMatrix d(4, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) d(i, j) = u[i] * v[j];
  auto f = truncated_svd(SparseMatrix::from_dense(d), 1);
  double nu = 0, nv = 0;
  for (double x : u) nu += x * x;
  for (double x : v) nv += x * x;
  EXPECT_NEAR(f.sigma[0], std::sqrt(nu) * std::sqrt(nv), 1e-12);
  auto r = test::reconstruct(f);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(r(i, j), d(i, j), 1e-12);
}

TEST(Svd, RankOutOfRangeThrows) {
  auto m = SparseMatrix::from_dense(test::random_dense(3, 4, 1));
  EXPECT_THROW(truncated_svd(m, 0), RankError);
  EXPECT_THROW(truncated_svd(m, 4), RankError);
  EXPECT_NO_THROW(truncated_svd(m, 3));
}

TEST(Svd, SingularValuesMatchGramOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{20, 15}, {15, 20}, {7, 7}}) {
      auto d = test::random_dense(rows, cols, seed);
      const auto oracle = test::singular_values_oracle(d);
      const std::size_t k = std::min(rows, cols);
      auto f = truncated_svd(SparseMatrix::from_dense(d), k);
      for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(f.sigma[i], oracle[i], 1e-6 * oracle[0]) << seed;
      for (std::size_t i = 1; i < k; ++i) EXPECT_LE(f.sigma[i], f.sigma[i - 1]);
      for (double s : f.sigma) EXPECT_GE(s, 0.0);
    }
  }
}

TEST(Svd, EckartYoungAndOrthonormality) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto d = test::random_dense(20, 15, seed);
    const auto oracle = test::singular_values_oracle(d);
    for (std::size_t k : {1u, 5u, 14u}) {
      auto f = truncated_svd(SparseMatrix::from_dense(d), k);
      auto r = test::reconstruct(f);
      double err = 0.0;
      for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 15; ++j) err += (d(i, j) - r(i, j)) * (d(i, j) - r(i, j));
      double tail = 0.0;
      for (std::size_t i = k; i < oracle.size(); ++i) tail += oracle[i] * oracle[i];
      EXPECT_NEAR(std::sqrt(err), std::sqrt(tail), 1e-6 * std::sqrt(tail));
      auto [ru, rv] = test::orthonormality_residuals(f);
      EXPECT_LE(ru, 1e-8);
      EXPECT_LE(rv, 1e-8);
    }
  }
}

TEST(Svd, FullRankReconstructsAfterAddingMeans) {
  auto d = test::random_dense(4, 3, 42);
  auto c = mean_center_rows(SparseMatrix::from_dense(d));
  auto f = truncated_svd(c.centered, 3);
  f.row_means = c.row_means;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(predict_entry(f, i, j), d(i, j), 1e-6);
}

TEST(Svd, ZeroRankPredictsMean) {
  SvdFactors f;
  f.u = DenseMatrix(2, 0);
  f.vt = DenseMatrix(0, 3);
  f.row_means = {1.5, -2.0};
  EXPECT_EQ(predict_entry(f, 0, 2), 1.5);
  EXPECT_EQ(predict_entry(f, 1, 0), -2.0);
  EXPECT_THROW(predict_entry(f, 2, 0), IndexError);
  EXPECT_THROW(predict_entry(f, 0, 3), IndexError);
}

TEST(Svd, SignConventionAndDeterminism) {
  auto m = SparseMatrix::from_dense(test::random_dense(12, 9, 5));
  auto a = truncated_svd(m, 6);
  auto b = truncated_svd(m, 6);
  EXPECT_EQ(a, b);
  for (std::size_t c = 0; c < a.rank(); ++c) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.u.rows(); ++i)
      if (std::abs(a.u(i, c)) > std::abs(best)) best = a.u(i, c);
    EXPECT_GE(best, 0.0);
  }
}

TEST(Svd, RankDeficientInputStillOrthonormal) {
  // Two identical rows and a zero row: rank 2 of a 4x3 matrix.
  auto m = SparseMatrix::from_triplets(4, 3, {{0, 0, 1}, {0, 1, 2}, {1, 0, 1}, {1, 1, 2}, {2, 2, 3}});
  auto f = truncated_svd(m, 3);
  EXPECT_NEAR(f.sigma[2], 0.0, 1e-12);
  auto [ru, rv] = test::orthonormality_residuals(f);
  EXPECT_LE(ru, 1e-8);
  EXPECT_LE(rv, 1e-8);
}

TEST(Svd, PowerPathAgreesWithJacobi) {
  std::mt19937_64 rng(8);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = 0; j < 40; ++j)
      if (rng() % 4 == 0) t.push_back({i, j, static_cast<double>(1 + rng() % 5)});
  auto m = SparseMatrix::from_triplets(60, 40, t);
  SvdOptions jac{.method = SvdMethod::jacobi};
  SvdOptions pow{.method = SvdMethod::power, .max_iterations = 5000, .tolerance = 1e-13};
  auto a = truncated_svd(m, 5, jac);
  auto b = truncated_svd(m, 5, pow);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(a.sigma[i], b.sigma[i], 1e-6 * a.sigma[0]);
  auto [ru, rv] = test::orthonormality_residuals(b);
  EXPECT_LE(ru, 1e-8);
  EXPECT_LE(rv, 1e-8);
  // sigma_5 and sigma_6 are 0.5% apart, so the rank-5 subspace itself is
  // ill-conditioned; the truncation error is what must agree.
  auto full = truncated_svd(m, 40, jac);
  double tail = 0.0;
  for (std::size_t i = 5; i < 40; ++i) tail += full.sigma[i] * full.sigma[i];
  auto d = m.to_dense();
  auto rb = test::reconstruct(b);
  double err = 0.0;
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = 0; j < 40; ++j) err += (d(i, j) - rb(i, j)) * (d(i, j) - rb(i, j));
  EXPECT_NEAR(err, tail, 1e-6 * tail);
}

TEST(Svd, AutomaticUsesPowerAboveDenseLimit) {
  auto m = SparseMatrix::from_dense(test::random_dense(10, 8, 2));
  SvdOptions small_limit{.dense_limit = 4, .max_iterations = 5000, .tolerance = 1e-13};
  auto a = truncated_svd(m, 3, small_limit);
  auto b = truncated_svd(m, 3);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a.sigma[i], b.sigma[i], 1e-6 * b.sigma[0]);
}

TEST(Svd, PredictRowMatchesPredictEntry) {
  auto c = mean_center_rows(SparseMatrix::from_dense(test::random_dense(6, 5, 9)));
  auto f = truncated_svd(c.centered, 3);
  f.row_means = c.row_means;
  for (std::size_t i = 0; i < 6; ++i) {
    auto row = predict_row(f, i);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(row[j], predict_entry(f, i, j), 1e-14);
  }
}
