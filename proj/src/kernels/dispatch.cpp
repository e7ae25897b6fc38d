#include <cstdlib>
#include <string_view>

#include "meb/kernels.hpp"

namespace meb::kernels {

const KernelTable& active() {
  static const KernelTable& chosen = [] () -> const KernelTable& {
    const char* env = std::getenv("MEB_KERNELS");
    if (env && std::string_view(env) == "scalar") return scalar();
    if (const KernelTable* t = avx2()) return *t;
    return scalar();
  }();
  return chosen;
}

}  // namespace meb::kernels
