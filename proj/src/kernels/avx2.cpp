#include "fdi/kernels.hpp"

#include <algorithm>

#include <immintrin.h>

namespace fdi::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void gemv_avx2(std::ptrdiff_t rows, std::ptrdiff_t cols, const double* a,
               std::ptrdiff_t lda, const double* x, double* y) {
  std::ptrdiff_t j = 0;
  // Two columns per pass halves the load/store traffic on y.
  for (; j + 1 < cols; j += 2) {
    const double* c0 = a + j * lda;
    const double* c1 = c0 + lda;
    const __m256d x0 = _mm256_set1_pd(x[j]);
    const __m256d x1 = _mm256_set1_pd(x[j + 1]);
    std::ptrdiff_t i = 0;
    for (; i + 4 <= rows; i += 4) {
      __m256d acc = _mm256_loadu_pd(y + i);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(c0 + i), x0, acc);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(c1 + i), x1, acc);
      _mm256_storeu_pd(y + i, acc);
    }
    for (; i < rows; ++i) y[i] += c0[i] * x[j] + c1[i] * x[j + 1];
  }
  for (; j < cols; ++j) {
    const double* c0 = a + j * lda;
    const __m256d x0 = _mm256_set1_pd(x[j]);
    std::ptrdiff_t i = 0;
    for (; i + 4 <= rows; i += 4) {
      __m256d acc = _mm256_loadu_pd(y + i);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(c0 + i), x0, acc);
      _mm256_storeu_pd(y + i, acc);
    }
    for (; i < rows; ++i) y[i] += c0[i] * x[j];
  }
}

double sum_squares_avx2(const double* x, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d v0 = _mm256_loadu_pd(x + i);
    const __m256d v1 = _mm256_loadu_pd(x + i + 4);
    a0 = _mm256_fmadd_pd(v0, v0, a0);
    a1 = _mm256_fmadd_pd(v1, v1, a1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d v0 = _mm256_loadu_pd(x + i);
    a0 = _mm256_fmadd_pd(v0, v0, a0);
  }
  double acc = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void window_sum_squares_avx2(const double* x, std::size_t n, std::size_t window,
                             double* out) {
  if (window == 0) {
    std::fill(out, out + n, 0.0);
    return;
  }
  // Per-sample increments x[k]^2 - x[k-w]^2 are independent, so they are
  // formed four at a time; the prefix sum itself stays sequential.
  std::size_t k = 0;
  for (; k < std::min(window, n); ++k) out[k] = x[k] * x[k];
  for (; k + 4 <= n; k += 4) {
    const __m256d v = _mm256_loadu_pd(x + k);
    const __m256d o = _mm256_loadu_pd(x + k - window);
    _mm256_storeu_pd(out + k, _mm256_fnmadd_pd(o, o, _mm256_mul_pd(v, v)));
  }
  for (; k < n; ++k) out[k] = x[k] * x[k] - x[k - window] * x[k - window];

  double running = 0.0;
  for (k = 0; k < n; ++k) {
    if (k % window == window - 1 && k + 1 >= window) {
      running = sum_squares_avx2(x + k + 1 - window, window);
    } else {
      running += out[k];
    }
    out[k] = std::max(running, 0.0);
  }
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{"avx2", gemv_avx2, sum_squares_avx2,
                                 window_sum_squares_avx2};
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &table : nullptr;
}

}  // namespace fdi::kernels
