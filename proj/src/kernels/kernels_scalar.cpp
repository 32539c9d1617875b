#include <algorithm>
#include <limits>

#include "sipi/kernels.hpp"

namespace sipi::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, std::size_t lda,
                 const double* x, double* y) {
  std::fill(y, y + rows, 0.0);
  for (std::size_t j = 0; j < cols; ++j) {
    const double xj = x[j];
    const double* col = a + j * lda;
    for (std::size_t i = 0; i < rows; ++i) y[i] += col[i] * xj;
  }
}

Chord chord_scalar(const double* slack, const double* dir, std::size_t n) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Chord c{-inf, inf};
  for (std::size_t i = 0; i < n; ++i) {
    if (dir[i] > 0.0) {
      c.hi = std::min(c.hi, slack[i] / dir[i]);
    } else if (dir[i] < 0.0) {
      c.lo = std::max(c.lo, slack[i] / dir[i]);
    }
  }
  return c;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", dot_scalar, axpy_scalar, gemv_scalar, chord_scalar};
  return table;
}

}  // namespace sipi::kernels
