#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace cardmatch {

// Solve A x = b for a symmetric positive definite A (row-major n x n) by
// Cholesky. Returns false if a pivot collapses below tol.
inline bool cholesky_solve(std::vector<double> a, std::vector<double> b,
                           std::size_t n, std::vector<double>& x,
                           double tol = 1e-14) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (d < tol) return false;
    const double lj = std::sqrt(d);
    a[j * n + j] = lj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / lj;
    }
  }
  // Forward then back substitution with L stored in the lower triangle.
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  x.assign(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a[k * n + ii] * x[k];
    x[ii] = s / a[ii * n + ii];
  }
  return true;
}

}  // namespace cardmatch
