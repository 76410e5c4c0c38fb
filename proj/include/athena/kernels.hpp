#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version in
// athena::kernels and a serial reference in athena::kernels::reference with
// the same contract; tests compare the two and bench/ times them.

#include <cstddef>
#include <span>

#include "athena/linalg.hpp"

namespace athena::kernels {

/// Hestenes one-sided Jacobi on `columns` (ncols column vectors of length
/// `rows`, stored back to back). Rotations are accumulated into `v`
/// (ncols x ncols, column-major, initialised by the caller). A pair is
/// rotated while |a_p . a_q| > tol * |a_p| |a_q|.
///
/// Returns the number of sweeps used, or max_sweeps + 1 when not converged.
/// Pairs are visited in round-robin tournament order so each step updates
/// disjoint columns; the result does not depend on the thread count.
std::size_t jacobi_orthogonalize(std::span<double> columns, std::size_t rows, std::size_t ncols, std::span<double> v,
                                 std::size_t max_sweeps, double tol);

/// y = M x.
void spmv(const linalg::SparseMatrix& m, std::span<const double> x, std::span<double> y);

/// out[j] = mean + sum_c scaled_u[c] * vt(c, j), with scaled_u[c] = U[i,c] sigma_c.
void predict_row(std::span<const double> scaled_u, const linalg::DenseMatrix& vt, double mean, std::span<double> out);

/// out[r] = cosine(query, rows[r]) using precomputed squared norms.
void cosine_scan(const linalg::SparseVector& query, double query_sq_norm, std::span<const linalg::SparseVector> rows,
                 std::span<const double> row_sq_norms, std::span<double> out);

namespace reference {

// Cyclic row-by-row pair ordering.
std::size_t jacobi_orthogonalize(std::span<double> columns, std::size_t rows, std::size_t ncols, std::span<double> v,
                                 std::size_t max_sweeps, double tol);
void spmv(const linalg::SparseMatrix& m, std::span<const double> x, std::span<double> y);
void predict_row(std::span<const double> scaled_u, const linalg::DenseMatrix& vt, double mean, std::span<double> out);
void cosine_scan(const linalg::SparseVector& query, double query_sq_norm, std::span<const linalg::SparseVector> rows,
                 std::span<const double> row_sq_norms, std::span<double> out);

}  // namespace reference
}  // namespace athena::kernels
