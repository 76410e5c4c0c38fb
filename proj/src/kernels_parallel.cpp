#include <numeric>
#include <vector>

#include "athena/kernels.hpp"
#include "kernels_detail.hpp"

namespace athena::kernels {

std::size_t jacobi_orthogonalize(std::span<double> columns, std::size_t rows, std::size_t ncols, std::span<double> v,
                                 std::size_t max_sweeps, double tol) {
  if (ncols < 2) return 0;
  // Tournament positions; an odd column count gets a bye slot.
  const std::size_t slots = ncols + (ncols % 2);
  std::vector<std::size_t> pos(slots);
  std::iota(pos.begin(), pos.end(), 0);
  const std::size_t half = slots / 2;

  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    long rotations = 0;
    for (std::size_t round = 0; round + 1 < slots; ++round) {
#pragma omp parallel for schedule(static) reduction(+ : rotations)
      for (long k = 0; k < static_cast<long>(half); ++k) {
        std::size_t p = pos[static_cast<std::size_t>(k)];
        std::size_t q = pos[slots - 1 - static_cast<std::size_t>(k)];
        if (p >= ncols || q >= ncols) continue;
        if (p > q) std::swap(p, q);
        if (detail::rotate_pair(columns.data(), rows, v.data(), ncols, p, q, tol)) ++rotations;
      }
      // Keep slot 0 fixed, rotate the rest by one.
      std::size_t last = pos[slots - 1];
      for (std::size_t i = slots - 1; i > 1; --i) pos[i] = pos[i - 1];
      pos[1] = last;
    }
    if (rotations == 0) return sweep;
  }
  return max_sweeps + 1;
}

void spmv(const linalg::SparseMatrix& m, std::span<const double> x, std::span<double> y) {
  const auto offsets = m.offsets();
  const auto indices = m.indices();
  const auto values = m.values();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(m.rows()); ++i) {
    double sum = 0.0;
    for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e) sum += values[e] * x[indices[e]];
    y[static_cast<std::size_t>(i)] = sum;
  }
}

void predict_row(std::span<const double> scaled_u, const linalg::DenseMatrix& vt, double mean, std::span<double> out) {
  const std::size_t k = scaled_u.size();
#pragma omp parallel for schedule(static)
  for (long j = 0; j < static_cast<long>(vt.cols()); ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) acc += scaled_u[c] * vt(c, static_cast<std::size_t>(j));
    out[static_cast<std::size_t>(j)] = mean + acc;
  }
}

void cosine_scan(const linalg::SparseVector& query, double query_sq_norm, std::span<const linalg::SparseVector> rows,
                 std::span<const double> row_sq_norms, std::span<double> out) {
#pragma omp parallel for schedule(dynamic, 64)
  for (long r = 0; r < static_cast<long>(rows.size()); ++r) {
    const auto i = static_cast<std::size_t>(r);
    out[i] = linalg::cosine_from_parts(linalg::dot(query, rows[i]), query_sq_norm, row_sq_norms[i]);
  }
}

}  // namespace athena::kernels
