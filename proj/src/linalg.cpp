#include "athena/linalg.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "athena/error.hpp"
#include "athena/kernels.hpp"

namespace athena::linalg {

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols)
      throw IndexError("triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) + ") outside " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    if (!std::isfinite(t.value)) throw ValidationError(0, "value", "non-finite matrix entry");
  }
  std::sort(triplets.begin(), triplets.end(),
            [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });

  SparseMatrix m(rows, cols);
  std::size_t t = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    while (t < triplets.size() && triplets[t].row == i) {
      const std::size_t j = triplets[t].col;
      double sum = 0.0;
      while (t < triplets.size() && triplets[t].row == i && triplets[t].col == j) sum += triplets[t++].value;
      if (sum != 0.0) {
        m.indices_.push_back(static_cast<std::uint32_t>(j));
        m.values_.push_back(sum);
      }
    }
    m.offsets_[i + 1] = m.values_.size();
  }
  return m;
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
  std::vector<Triplet> triplets;
  for (std::size_t i = 0; i < dense.rows(); ++i)
    for (std::size_t j = 0; j < dense.cols(); ++j)
      if (dense(i, j) != 0.0) triplets.push_back({i, j, dense(i, j)});
  return from_triplets(dense.rows(), dense.cols(), std::move(triplets));
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
  if (i >= rows_ || j >= cols_) throw IndexError("matrix index out of range");
  auto idx = row_indices(i);
  auto it = std::lower_bound(idx.begin(), idx.end(), static_cast<std::uint32_t>(j));
  if (it == idx.end() || *it != j) return 0.0;
  return row_values(i)[static_cast<std::size_t>(it - idx.begin())];
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    auto idx = row_indices(i);
    auto val = row_values(i);
    for (std::size_t e = 0; e < idx.size(); ++e) d(i, idx[e]) = val[e];
  }
  return d;
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t(cols_, rows_);
  std::vector<std::size_t> counts(cols_ + 1, 0);
  for (auto j : indices_) ++counts[j + 1];
  std::partial_sum(counts.begin(), counts.end(), t.offsets_.begin());
  t.indices_.resize(indices_.size());
  t.values_.resize(values_.size());
  std::vector<std::size_t> cursor(t.offsets_.begin(), t.offsets_.end() - 1);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
      auto& slot = cursor[indices_[e]];
      t.indices_[slot] = static_cast<std::uint32_t>(i);
      t.values_[slot] = values_[e];
      ++slot;
    }
  }
  return t;
}

SparseMatrix SparseMatrix::with_values(std::vector<double> values) const {
  if (values.size() != values_.size()) throw ValidationError(0, "values", "value count does not match pattern");
  SparseMatrix m = *this;
  m.values_ = std::move(values);
  return m;
}

void SparseMatrix::validate() const {
  if (offsets_.size() != rows_ + 1 || offsets_.front() != 0 || offsets_.back() != values_.size() ||
      indices_.size() != values_.size())
    throw ValidationError(0, "offsets", "inconsistent row offsets");
  for (std::size_t i = 0; i < rows_; ++i) {
    if (offsets_[i] > offsets_[i + 1]) throw ValidationError(0, "offsets", "decreasing row offsets");
    for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
      if (indices_[e] >= cols_) throw ValidationError(0, "indices", "column index out of range");
      if (e > offsets_[i] && indices_[e] <= indices_[e - 1])
        throw ValidationError(0, "indices", "column indices not strictly increasing");
      if (!std::isfinite(values_[e])) throw ValidationError(0, "values", "non-finite value");
    }
  }
}

CenteredMatrix mean_center_rows(const SparseMatrix& m) {
  CenteredMatrix out;
  out.row_means.assign(m.rows(), 0.0);
  std::vector<double> values(m.values().begin(), m.values().end());
  const auto offsets = m.offsets();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const std::size_t begin = offsets[i], end = offsets[i + 1];
    if (begin == end) continue;
    double sum = 0.0;
    for (std::size_t e = begin; e < end; ++e) sum += values[e];
    const double mean = sum / static_cast<double>(end - begin);
    out.row_means[i] = mean;
    for (std::size_t e = begin; e < end; ++e) values[e] -= mean;
  }
  out.centered = m.with_values(std::move(values));
  return out;
}

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void scale(std::span<double> a, double f) {
  for (auto& x : a) x *= f;
}

// Removes the components of `x` along each basis vector (two passes).
void orthogonalize(std::span<double> x, const std::vector<std::vector<double>>& basis) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) {
      const double d = dot(x, b);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= d * b[i];
    }
}

// Orthonormal vectors of `length`; entries flagged in `degenerate` are
// replaced by unit vectors orthogonal to every other entry.
void complete_basis(std::vector<std::vector<double>>& vecs, const std::vector<bool>& degenerate, std::size_t length) {
  std::vector<std::vector<double>> accepted;
  for (std::size_t c = 0; c < vecs.size(); ++c)
    if (!degenerate[c]) accepted.push_back(vecs[c]);
  std::size_t next_axis = 0;
  for (std::size_t c = 0; c < vecs.size(); ++c) {
    if (!degenerate[c]) continue;
    for (; next_axis < length; ++next_axis) {
      std::vector<double> e(length, 0.0);
      e[next_axis] = 1.0;
      orthogonalize(e, accepted);
      const double n = norm(e);
      if (n > 0.5) {
        scale(e, 1.0 / n);
        vecs[c] = e;
        accepted.push_back(std::move(e));
        ++next_axis;
        break;
      }
    }
  }
}

struct Triplets {
  std::vector<double> sigma;
  std::vector<std::vector<double>> left;   // length m each
  std::vector<std::vector<double>> right;  // length n each
};

SvdFactors assemble(Triplets t, std::size_t m, std::size_t n, double zero_threshold) {
  const std::size_t k = t.sigma.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return t.sigma[a] > t.sigma[b]; });

  std::vector<double> sigma(k);
  std::vector<std::vector<double>> left(k), right(k);
  std::vector<bool> left_bad(k), right_bad(k);
  for (std::size_t c = 0; c < k; ++c) {
    sigma[c] = t.sigma[order[c]];
    left[c] = std::move(t.left[order[c]]);
    right[c] = std::move(t.right[order[c]]);
    left_bad[c] = left[c].empty();
    right_bad[c] = right[c].empty();
    if (left_bad[c]) left[c].assign(m, 0.0);
    if (right_bad[c]) right[c].assign(n, 0.0);
    if (sigma[c] <= zero_threshold) sigma[c] = std::max(sigma[c], 0.0);
  }
  complete_basis(left, left_bad, m);
  complete_basis(right, right_bad, n);

  SvdFactors f;
  f.u = DenseMatrix(m, k);
  f.vt = DenseMatrix(k, n);
  f.sigma = std::move(sigma);
  f.row_means.assign(m, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (std::abs(left[c][i]) > std::abs(left[c][arg])) arg = i;
    const double sign = left[c][arg] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < m; ++i) f.u(i, c) = sign * left[c][i];
    for (std::size_t j = 0; j < n; ++j) f.vt(c, j) = sign * right[c][j];
  }
  return f;
}

SvdFactors jacobi_svd(const SparseMatrix& mat, std::size_t k, const SvdOptions& options) {
  const std::size_t m = mat.rows(), n = mat.cols();
  const bool tall = m >= n;
  const std::size_t len = tall ? m : n;   // working column length
  const std::size_t count = tall ? n : m; // working column count

  std::vector<double> work(len * count, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    auto idx = mat.row_indices(i);
    auto val = mat.row_values(i);
    for (std::size_t e = 0; e < idx.size(); ++e) {
      const std::size_t j = idx[e];
      if (tall)
        work[j * m + i] = val[e];
      else
        work[i * n + j] = val[e];
    }
  }
  std::vector<double> v(count * count, 0.0);
  for (std::size_t i = 0; i < count; ++i) v[i * count + i] = 1.0;

  const double tol = std::max(1e-15, static_cast<double>(len) * kEps);
  const auto sweeps = kernels::jacobi_orthogonalize(work, len, count, v, options.max_iterations, tol);
  if (sweeps > options.max_iterations) {
    double worst = 0.0;
    for (std::size_t p = 0; p < count; ++p)
      for (std::size_t q = p + 1; q < count; ++q) {
        std::span<const double> a(work.data() + p * len, len), b(work.data() + q * len, len);
        const double na = norm(a), nb = norm(b);
        if (na > 0 && nb > 0) worst = std::max(worst, std::abs(dot(a, b)) / (na * nb));
      }
    throw ConvergenceError("Jacobi SVD did not converge in " + std::to_string(options.max_iterations) + " sweeps",
                           worst);
  }

  std::vector<double> norms(count);
  double largest = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    norms[j] = norm(std::span<const double>(work.data() + j * len, len));
    largest = std::max(largest, norms[j]);
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return norms[a] > norms[b]; });

  const double zero_threshold = largest * static_cast<double>(len) * kEps;
  Triplets t;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t j = order[c];
    std::vector<double> normalized;
    if (norms[j] > zero_threshold && norms[j] > 0.0) {
      normalized.assign(work.begin() + static_cast<std::ptrdiff_t>(j * len),
                        work.begin() + static_cast<std::ptrdiff_t>((j + 1) * len));
      scale(normalized, 1.0 / norms[j]);
    }
    std::vector<double> rotation(v.begin() + static_cast<std::ptrdiff_t>(j * count),
                                 v.begin() + static_cast<std::ptrdiff_t>((j + 1) * count));
    t.sigma.push_back(norms[j]);
    if (tall) {
      t.left.push_back(std::move(normalized));
      t.right.push_back(std::move(rotation));
    } else {
      t.left.push_back(std::move(rotation));
      t.right.push_back(std::move(normalized));
    }
  }
  return assemble(std::move(t), m, n, zero_threshold);
}

SvdFactors power_svd(const SparseMatrix& mat, std::size_t k, const SvdOptions& options) {
  const std::size_t m = mat.rows(), n = mat.cols();
  const SparseMatrix mt = mat.transposed();
  std::vector<std::vector<double>> found;  // right singular vectors so far
  std::vector<double> tmp(m), w(n);
  Triplets t;
  double largest = 0.0;

  for (std::size_t c = 0; c < k; ++c) {
    std::mt19937_64 rng(0x5eedULL + c);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    orthogonalize(v, found);
    scale(v, 1.0 / norm(v));

    double previous = 0.0, current = 0.0;
    bool converged = false, exhausted = false;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      kernels::spmv(mat, v, tmp);
      kernels::spmv(mt, tmp, w);
      orthogonalize(w, found);
      const double lambda = norm(w);
      if (lambda <= largest * largest * static_cast<double>(std::max(m, n)) * kEps || lambda == 0.0) {
        exhausted = true;
        converged = true;
        break;
      }
      scale(w, 1.0 / lambda);
      double moved = 0.0;
      for (std::size_t j = 0; j < n; ++j) moved += (w[j] - v[j]) * (w[j] - v[j]);
      v = w;
      current = std::sqrt(lambda);
      // sigma settles quadratically faster than the vector, so require both.
      if (it > 0 && std::abs(current - previous) <= options.tolerance * current &&
          std::sqrt(moved) <= std::sqrt(options.tolerance)) {
        converged = true;
        break;
      }
      previous = current;
    }
    if (!converged)
      throw ConvergenceError("power iteration did not converge for singular value " + std::to_string(c + 1),
                             std::abs(current - previous) / std::max(current, kEps));

    std::vector<double> u(m);
    kernels::spmv(mat, v, u);
    double s = norm(u);
    if (exhausted) s = 0.0;
    largest = std::max(largest, s);
    if (s > 0.0) {
      scale(u, 1.0 / s);
    } else {
      u.clear();
    }
    found.push_back(v);
    t.sigma.push_back(s);
    t.left.push_back(std::move(u));
    t.right.push_back(std::move(v));
  }

  // Re-orthonormalise the left vectors; power iteration leaves them only
  // approximately orthogonal.
  std::vector<std::vector<double>> accepted;
  for (auto& u : t.left) {
    if (u.empty()) continue;
    orthogonalize(u, accepted);
    const double nu = norm(u);
    if (nu < 0.5) {
      u.clear();
      continue;
    }
    scale(u, 1.0 / nu);
    accepted.push_back(u);
  }
  return assemble(std::move(t), m, n, largest * static_cast<double>(std::max(m, n)) * kEps);
}

}  // namespace

SvdFactors truncated_svd(const SparseMatrix& m, std::size_t k, const SvdOptions& options) {
  const std::size_t limit = std::min(m.rows(), m.cols());
  if (k < 1 || k > limit)
    throw RankError("rank " + std::to_string(k) + " outside [1, " + std::to_string(limit) + "]");
  for (double x : m.values())
    if (!std::isfinite(x)) throw ValidationError(0, "values", "non-finite matrix entry");
  bool use_jacobi = options.method == SvdMethod::jacobi ||
                    (options.method == SvdMethod::automatic && limit <= options.dense_limit);
  return use_jacobi ? jacobi_svd(m, k, options) : power_svd(m, k, options);
}

double predict_entry(const SvdFactors& f, std::size_t i, std::size_t j) {
  if (i >= f.rows() || j >= f.cols())
    throw IndexError("prediction index (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
  double acc = 0.0;
  for (std::size_t c = 0; c < f.rank(); ++c) acc += (f.u(i, c) * f.sigma[c]) * f.vt(c, j);
  return f.row_means[i] + acc;
}

std::vector<double> predict_row(const SvdFactors& f, std::size_t i) {
  if (i >= f.rows()) throw IndexError("prediction row " + std::to_string(i) + " out of range");
  std::vector<double> scaled(f.rank());
  for (std::size_t c = 0; c < f.rank(); ++c) scaled[c] = f.u(i, c) * f.sigma[c];
  std::vector<double> out(f.cols());
  kernels::predict_row(scaled, f.vt, f.row_means[i], out);
  return out;
}

}  // namespace athena::linalg
