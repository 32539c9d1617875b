#include <cstdlib>
#include <string_view>

#include "sipi/kernels.hpp"

namespace sipi::kernels {

namespace {

const KernelTable& select_table() {
  if (const char* env = std::getenv("SIPI_SIMD"); env != nullptr && std::string_view(env) == "scalar") {
    return scalar_table();
  }
  if (const KernelTable* t = avx2_table()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select_table();
  return table;
}

}  // namespace sipi::kernels
