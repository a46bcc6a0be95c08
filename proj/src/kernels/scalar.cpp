#include "fdi/kernels.hpp"

#include <algorithm>

namespace fdi::kernels {
namespace {

void gemv_scalar(std::ptrdiff_t rows, std::ptrdiff_t cols, const double* a,
                 std::ptrdiff_t lda, const double* x, double* y) {
  for (std::ptrdiff_t j = 0; j < cols; ++j) {
    const double xj = x[j];
    if (xj == 0.0) continue;
    const double* col = a + j * lda;
    for (std::ptrdiff_t i = 0; i < rows; ++i) y[i] += col[i] * xj;
  }
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

// Running sum, re-anchored by a direct sum once per window so rounding does
// not accumulate over long traces.
void window_sum_squares_scalar(const double* x, std::size_t n, std::size_t window,
                               double* out) {
  if (window == 0) {
    std::fill(out, out + n, 0.0);
    return;
  }
  double running = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k % window == window - 1 && k + 1 >= window) {
      running = sum_squares_scalar(x + k + 1 - window, window);
    } else {
      running += x[k] * x[k];
      if (k >= window) running -= x[k - window] * x[k - window];
    }
    out[k] = std::max(running, 0.0);
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", gemv_scalar, sum_squares_scalar,
                                 window_sum_squares_scalar};
  return table;
}

}  // namespace fdi::kernels
