#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace athena::linalg {

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse rows.
///
/// Column indices are strictly increasing within a row and every value is
/// finite. Matrices built from triplets or dense input never store zeros;
/// mean_center_rows keeps the observed pattern, so a centered row may hold
/// stored zeros.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), offsets_(rows + 1, 0) {}

  // Sums duplicate coordinates and drops entries that end up zero.
  // Throws IndexError on out-of-range coordinates, ValidationError on
  // non-finite values.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  static SparseMatrix from_dense(const DenseMatrix& dense);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const std::uint32_t> indices() const { return indices_; }
  std::span<const double> values() const { return values_; }
  std::span<const std::uint32_t> row_indices(std::size_t i) const {
    return {indices_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {values_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  // Value at (i, j), zero when not stored.
  double at(std::size_t i, std::size_t j) const;
  DenseMatrix to_dense() const;
  SparseMatrix transposed() const;

  // Same sparsity pattern with new values (one per stored entry).
  SparseMatrix with_values(std::vector<double> values) const;

  // Throws ValidationError on a broken structural invariant.
  void validate() const;

  bool operator==(const SparseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
};

struct CenteredMatrix {
  SparseMatrix centered;
  std::vector<double> row_means;  // mean over observed entries, 0 for empty rows
};

CenteredMatrix mean_center_rows(const SparseMatrix& m);

/// Sparse vector with sorted, unique indices.
struct SparseVector {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  bool operator==(const SparseVector&) const = default;
};

inline double dot(const SparseVector& a, const SparseVector& b) {
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.indices.size() && j < b.indices.size()) {
    if (a.indices[i] < b.indices[j]) {
      ++i;
    } else if (b.indices[j] < a.indices[i]) {
      ++j;
    } else {
      sum += a.values[i++] * b.values[j++];
    }
  }
  return sum;
}

inline double squared_norm(const SparseVector& v) {
  double sum = 0.0;
  for (double x : v.values) sum += x * x;
  return sum;
}

// Cosine from precomputed squared norms; zero when either norm is zero.
inline double cosine_from_parts(double dot_ab, double sq_a, double sq_b) {
  if (sq_a <= 0.0 || sq_b <= 0.0) return 0.0;
  return dot_ab / std::sqrt(sq_a * sq_b);
}

/// Rank-k factors of a (row-centered) matrix: M ~ U diag(sigma) Vt, plus the
/// row means that were removed before factorizing.
struct SvdFactors {
  DenseMatrix u;                 // m x k, orthonormal columns
  std::vector<double> sigma;     // k, non-increasing, non-negative
  DenseMatrix vt;                // k x n, orthonormal rows
  std::vector<double> row_means; // m

  std::size_t rank() const { return sigma.size(); }
  std::size_t rows() const { return row_means.size(); }
  std::size_t cols() const { return vt.cols(); }

  bool operator==(const SvdFactors&) const = default;
};

enum class SvdMethod { automatic, jacobi, power };

struct SvdOptions {
  SvdMethod method = SvdMethod::automatic;
  std::size_t dense_limit = 512;        // automatic uses Jacobi when min(m, n) <= this
  std::size_t max_iterations = 1000;    // Jacobi sweeps or power iterations per vector
  double tolerance = 1e-10;             // relative singular-value change for power iteration
};

/// Top-k singular triplets of `m`, reading missing entries as zero.
///
/// Each U column is signed so its largest-magnitude component is
/// non-negative. `row_means` of the result is zero-filled; callers attach
/// their own. Throws RankError unless 1 <= k <= min(m, n), ConvergenceError
/// if the iteration budget runs out.
SvdFactors truncated_svd(const SparseMatrix& m, std::size_t k, const SvdOptions& options = {});

/// row_means[i] + sum_c U[i,c] sigma_c Vt[c,j]. Throws IndexError.
double predict_entry(const SvdFactors& f, std::size_t i, std::size_t j);

/// predict_entry for every column of row i.
std::vector<double> predict_row(const SvdFactors& f, std::size_t i);

}  // namespace athena::linalg
