#pragma once

#include <cstddef>

namespace fdi::kernels {

// y += A x for a column-major rows x cols block with leading dimension lda.
using GemvFn = void (*)(std::ptrdiff_t rows, std::ptrdiff_t cols, const double* a,
                        std::ptrdiff_t lda, const double* x, double* y);
// Sum of x[i]^2.
using SumSquaresFn = double (*)(const double* x, std::size_t n);
// out[k] = sum of x[i]^2 over the last `window` samples ending at k, with
// samples before the start treated as zero.
using WindowSumSquaresFn = void (*)(const double* x, std::size_t n,
                                    std::size_t window, double* out);

struct KernelTable {
  const char* name;
  GemvFn gemv;
  SumSquaresFn sum_squares;
  WindowSumSquaresFn window_sum_squares;
};

const KernelTable& scalar_kernels();
// nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();
// Best table for this CPU; FDI_FORCE_SCALAR=1 in the environment pins the
// scalar reference.
const KernelTable& active_kernels();

}  // namespace fdi::kernels
