#include <algorithm>
#include <limits>

#include "sipi/kernels.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define SIPI_HAVE_AVX2_BUILD 1
#include <immintrin.h>
#else
#define SIPI_HAVE_AVX2_BUILD 0
#endif

namespace sipi::kernels {

#if SIPI_HAVE_AVX2_BUILD

#define SIPI_AVX2 __attribute__((target("avx2,fma")))

namespace {

SIPI_AVX2 double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

SIPI_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

SIPI_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

SIPI_AVX2 void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, std::size_t lda,
                         const double* x, double* y) {
  std::size_t i = 0;
  for (; i + 16 <= rows; i += 16) {
    __m256d y0 = _mm256_setzero_pd();
    __m256d y1 = _mm256_setzero_pd();
    __m256d y2 = _mm256_setzero_pd();
    __m256d y3 = _mm256_setzero_pd();
    for (std::size_t j = 0; j < cols; ++j) {
      const double* col = a + j * lda + i;
      const __m256d xj = _mm256_set1_pd(x[j]);
      y0 = _mm256_fmadd_pd(_mm256_loadu_pd(col), xj, y0);
      y1 = _mm256_fmadd_pd(_mm256_loadu_pd(col + 4), xj, y1);
      y2 = _mm256_fmadd_pd(_mm256_loadu_pd(col + 8), xj, y2);
      y3 = _mm256_fmadd_pd(_mm256_loadu_pd(col + 12), xj, y3);
    }
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
    _mm256_storeu_pd(y + i + 8, y2);
    _mm256_storeu_pd(y + i + 12, y3);
  }
  for (; i + 4 <= rows; i += 4) {
    __m256d y0 = _mm256_setzero_pd();
    for (std::size_t j = 0; j < cols; ++j) {
      y0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + j * lda + i), _mm256_set1_pd(x[j]), y0);
    }
    _mm256_storeu_pd(y + i, y0);
  }
  for (; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += a[j * lda + i] * x[j];
    y[i] = s;
  }
}

SIPI_AVX2 Chord chord_avx2(const double* slack, const double* dir, std::size_t n) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const __m256d zero = _mm256_setzero_pd();
  const __m256d pinf = _mm256_set1_pd(inf);
  const __m256d ninf = _mm256_set1_pd(-inf);
  __m256d hi = pinf;
  __m256d lo = ninf;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_loadu_pd(dir + i);
    const __m256d ratio = _mm256_div_pd(_mm256_loadu_pd(slack + i), d);
    const __m256d pos = _mm256_cmp_pd(d, zero, _CMP_GT_OQ);
    const __m256d neg = _mm256_cmp_pd(d, zero, _CMP_LT_OQ);
    hi = _mm256_min_pd(hi, _mm256_blendv_pd(pinf, ratio, pos));
    lo = _mm256_max_pd(lo, _mm256_blendv_pd(ninf, ratio, neg));
  }
  alignas(32) double hs[4];
  alignas(32) double ls[4];
  _mm256_store_pd(hs, hi);
  _mm256_store_pd(ls, lo);
  Chord c{std::max(std::max(ls[0], ls[1]), std::max(ls[2], ls[3])),
          std::min(std::min(hs[0], hs[1]), std::min(hs[2], hs[3]))};
  for (; i < n; ++i) {
    if (dir[i] > 0.0) {
      c.hi = std::min(c.hi, slack[i] / dir[i]);
    } else if (dir[i] < 0.0) {
      c.lo = std::max(c.lo, slack[i] / dir[i]);
    }
  }
  return c;
}

}  // namespace

const KernelTable* avx2_table() {
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  static const KernelTable table{"avx2", dot_avx2, axpy_avx2, gemv_avx2, chord_avx2};
  return supported ? &table : nullptr;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace sipi::kernels
