#pragma once

// Inner-loop arithmetic for the constrained samplers. Every kernel has a scalar
// reference and (on x86-64) an AVX2/FMA variant; the variant is picked once at
// runtime from CPUID. Setting SIPI_SIMD=scalar in the environment forces the
// reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace sipi::kernels {

struct Chord {
  double lo;
  double hi;
};

struct KernelTable {
  std::string_view name;
  // sum_i a_i b_i
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = A x, A column-major rows x cols with leading dimension lda
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, std::size_t lda, const double* x,
               double* y);
  // Feasible step range {t : t * dir_i <= slack_i for all i}; slack must be >= 0.
  Chord (*chord)(const double* slack, const double* dir, std::size_t n);
};

const KernelTable& scalar_table();
/// nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();
/// The table selected for this process.
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline Chord chord_bounds(std::span<const double> slack, std::span<const double> dir) {
  return active().chord(slack.data(), dir.data(), slack.size());
}

}  // namespace sipi::kernels
