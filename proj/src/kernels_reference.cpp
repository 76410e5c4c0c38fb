#include "athena/kernels.hpp"
#include <vector>

#include "kernels_detail.hpp"

namespace athena::kernels::reference {

std::size_t jacobi_orthogonalize(std::span<double> columns, std::size_t rows, std::size_t ncols, std::span<double> v,
                                 std::size_t max_sweeps, double tol) {
  if (ncols < 2) return 0;
  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    std::size_t rotations = 0;
    for (std::size_t p = 0; p + 1 < ncols; ++p)
      for (std::size_t q = p + 1; q < ncols; ++q)
        if (detail::rotate_pair(columns.data(), rows, v.data(), ncols, p, q, tol)) ++rotations;
    if (rotations == 0) return sweep;
  }
  return max_sweeps + 1;
}

void spmv(const linalg::SparseMatrix& m, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double sum = 0.0;
    auto idx = m.row_indices(i);
    auto val = m.row_values(i);
    for (std::size_t e = 0; e < idx.size(); ++e) sum += val[e] * x[idx[e]];
    y[i] = sum;
  }
}

void predict_row(std::span<const double> scaled_u, const linalg::DenseMatrix& vt, double mean, std::span<double> out) {
  std::vector<double> acc(vt.cols(), 0.0);
  for (std::size_t c = 0; c < scaled_u.size(); ++c) {
    auto row = vt.row(c);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += scaled_u[c] * row[j];
  }
  for (std::size_t j = 0; j < acc.size(); ++j) out[j] = mean + acc[j];
}

void cosine_scan(const linalg::SparseVector& query, double query_sq_norm, std::span<const linalg::SparseVector> rows,
                 std::span<const double> row_sq_norms, std::span<double> out) {
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[i] = linalg::cosine_from_parts(linalg::dot(query, rows[i]), query_sq_norm, row_sq_norms[i]);
}

}  // namespace athena::kernels::reference
