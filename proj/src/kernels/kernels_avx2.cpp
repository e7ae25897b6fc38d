#include "meb/kernels.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define MEB_HAVE_AVX2_BUILD 1
#include <immintrin.h>
#else
#define MEB_HAVE_AVX2_BUILD 0
#endif

namespace meb::kernels {

#if MEB_HAVE_AVX2_BUILD

namespace {

#define MEB_AVX2 __attribute__((target("avx2,fma")))

MEB_AVX2 inline std::int32_t hsum_epi32(__m256i v) {
  __m128i s = _mm_add_epi32(_mm256_castsi256_si128(v), _mm256_extracti128_si256(v, 1));
  s = _mm_add_epi32(s, _mm_shuffle_epi32(s, _MM_SHUFFLE(1, 0, 3, 2)));
  s = _mm_add_epi32(s, _mm_shuffle_epi32(s, _MM_SHUFFLE(2, 3, 0, 1)));
  return _mm_cvtsi128_si32(s);
}

MEB_AVX2 inline float hsum_ps(__m256 v) {
  __m128 s = _mm_add_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps(v, 1));
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

MEB_AVX2 void matvec_i8(const std::int8_t* w, std::size_t rows, std::size_t cols,
                        const std::int8_t* x, std::int32_t* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const std::int8_t* row = w + r * cols;
    __m256i acc = _mm256_setzero_si256();
    std::size_t c = 0;
    for (; c + 16 <= cols; c += 16) {
      const __m256i wv = _mm256_cvtepi8_epi16(_mm_loadu_si128(reinterpret_cast<const __m128i*>(row + c)));
      const __m256i xv = _mm256_cvtepi8_epi16(_mm_loadu_si128(reinterpret_cast<const __m128i*>(x + c)));
      acc = _mm256_add_epi32(acc, _mm256_madd_epi16(wv, xv));
    }
    std::int32_t sum = hsum_epi32(acc);
    for (; c < cols; ++c) sum += std::int32_t{row[c]} * std::int32_t{x[c]};
    y[r] = sum;
  }
}

MEB_AVX2 float dot_f32(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float sum = hsum_ps(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

MEB_AVX2 void axpy_f32(float a, const float* x, float* y, std::size_t n) {
  const __m256 av = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

MEB_AVX2 std::int32_t max_abs_i32(const std::int32_t* x, std::size_t n) {
  __m256i m = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    m = _mm256_max_epi32(m, _mm256_abs_epi32(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(x + i))));
  }
  alignas(32) std::int32_t lanes[8];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), m);
  std::int32_t best = 0;
  for (std::int32_t v : lanes) best = v > best ? v : best;
  for (; i < n; ++i) {
    const std::int32_t a = x[i] < 0 ? -x[i] : x[i];
    if (a > best) best = a;
  }
  return best;
}

#undef MEB_AVX2

}  // namespace

const KernelTable* avx2() {
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  static const KernelTable table{"avx2", matvec_i8, dot_f32, axpy_f32, max_abs_i32};
  return supported ? &table : nullptr;
}

#else

const KernelTable* avx2() { return nullptr; }

#endif

}  // namespace meb::kernels
