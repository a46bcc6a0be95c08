#include "fdi/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace fdi::kernels {

#ifndef FDI_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

const KernelTable& active_kernels() {
  static const KernelTable& table = [] () -> const KernelTable& {
    const char* force = std::getenv("FDI_FORCE_SCALAR");
    if (force != nullptr && std::strcmp(force, "0") != 0) return scalar_kernels();
    if (const KernelTable* fast = avx2_kernels()) return *fast;
    return scalar_kernels();
  }();
  return table;
}

}  // namespace fdi::kernels
