#pragma once

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2 variant chosen at runtime. Integer kernels are bit-exact across
// variants; float kernels may differ in the last bits (FMA, reassociation).

#include <cstddef>
#include <cstdint>

namespace meb::kernels {

struct KernelTable {
  const char* name;
  // y[r] = sum_c w[r*cols + c] * x[c]
  void (*matvec_i8)(const std::int8_t* w, std::size_t rows, std::size_t cols,
                    const std::int8_t* x, std::int32_t* y);
  float (*dot_f32)(const float* a, const float* b, std::size_t n);
  // y += a * x
  void (*axpy_f32)(float a, const float* x, float* y, std::size_t n);
  std::int32_t (*max_abs_i32)(const std::int32_t* x, std::size_t n);
};

const KernelTable& scalar();
// nullptr when the build or the running CPU has no AVX2/FMA.
const KernelTable* avx2();
// AVX2 when available, unless the environment sets MEB_KERNELS=scalar.
const KernelTable& active();

}  // namespace meb::kernels
