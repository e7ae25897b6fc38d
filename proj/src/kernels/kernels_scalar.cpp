#include <cstdlib>

#include "meb/kernels.hpp"

namespace meb::kernels {

namespace {

void matvec_i8(const std::int8_t* w, std::size_t rows, std::size_t cols, const std::int8_t* x,
               std::int32_t* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const std::int8_t* row = w + r * cols;
    std::int32_t acc = 0;
    for (std::size_t c = 0; c < cols; ++c) acc += std::int32_t{row[c]} * std::int32_t{x[c]};
    y[r] = acc;
  }
}

float dot_f32(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_f32(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

std::int32_t max_abs_i32(const std::int32_t* x, std::size_t n) {
  std::int32_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t a = x[i] < 0 ? -x[i] : x[i];
    if (a > m) m = a;
  }
  return m;
}

}  // namespace

const KernelTable& scalar() {
  static const KernelTable table{"scalar", matvec_i8, dot_f32, axpy_f32, max_abs_i32};
  return table;
}

}  // namespace meb::kernels
