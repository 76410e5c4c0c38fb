#pragma once

#include <cmath>
#include <cstddef>

namespace athena::kernels::detail {

// One Hestenes rotation of columns p and q; returns whether it rotated.
inline bool rotate_pair(double* columns, std::size_t rows, double* v, std::size_t ncols, std::size_t p, std::size_t q,
                        double tol) {
  double* ap = columns + p * rows;
  double* aq = columns + q * rows;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    alpha += ap[i] * ap[i];
    beta += aq[i] * aq[i];
    gamma += ap[i] * aq[i];
  }
  if (alpha == 0.0 || beta == 0.0) return false;
  if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) return false;

  const double zeta = (beta - alpha) / (2.0 * gamma);
  const double t = std::abs(zeta) > 1e100 ? 0.5 / zeta
                                          : std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = c * t;
  for (std::size_t i = 0; i < rows; ++i) {
    const double x = ap[i], y = aq[i];
    ap[i] = c * x - s * y;
    aq[i] = s * x + c * y;
  }
  double* vp = v + p * ncols;
  double* vq = v + q * ncols;
  for (std::size_t i = 0; i < ncols; ++i) {
    const double x = vp[i], y = vq[i];
    vp[i] = c * x - s * y;
    vq[i] = s * x + c * y;
  }
  return true;
}

}  // namespace athena::kernels::detail
