#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "meb/kernels.hpp"

using namespace meb;

namespace {

std::vector<const kernels::KernelTable*> variants() {
  std::vector<const kernels::KernelTable*> v{&kernels::scalar()};
  if (kernels::avx2()) v.push_back(kernels::avx2());
  return v;
}

}  // namespace

TEST_CASE("active table is one of the variants") {
  const auto& a = kernels::active();
  bool found = false;
  for (const auto* v : variants()) found = found || v == &a;
  CHECK(found);
  MESSAGE("kernels: " << std::string(a.name));
}

TEST_CASE("int8 mat-vec is bit-exact across variants") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> full(-128, 127);
  for (std::size_t cols : {0u, 1u, 7u, 31u, 32u, 33u, 64u, 100u, 300u}) {
    for (std::size_t rows : {1u, 3u, 8u, 25u}) {
      std::vector<std::int8_t> w(rows * cols), x(cols);
      for (auto& v : w) v = static_cast<std::int8_t>(full(rng));
      for (auto& v : x) v = static_cast<std::int8_t>(full(rng));
      std::vector<std::int32_t> ref(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        std::int32_t acc = 0;
        for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * x[c];
        ref[r] = acc;
      }
      for (const auto* k : variants()) {
        std::vector<std::int32_t> y(rows, -7);
        k->matvec_i8(w.data(), rows, cols, x.data(), y.data());
        CHECK(y == ref);
      }
    }
  }
}

TEST_CASE("max |x| is bit-exact across variants") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::int32_t> u(-(1 << 30), 1 << 30);
  for (std::size_t n : {1u, 2u, 5u, 7u, 8u, 9u, 16u, 17u, 300u}) {
    std::vector<std::int32_t> x(n);
    for (int trial = 0; trial < 20; ++trial) {
      for (auto& v : x) v = u(rng);
      std::int32_t ref = 0;
      for (auto v : x) ref = std::max(ref, std::abs(v));
      for (const auto* k : variants()) CHECK(k->max_abs_i32(x.data(), n) == ref);
    }
  }
  for (const auto* k : variants()) CHECK(k->max_abs_i32(nullptr, 0) == 0);
}

TEST_CASE("float kernels agree to rounding") {
  std::mt19937_64 rng(8);
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (std::size_t n : {0u, 1u, 7u, 8u, 15u, 300u, 1001u}) {
    std::vector<float> a(n), b(n);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    double ref = 0.0, mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ref += static_cast<double>(a[i]) * b[i];
      mag += std::abs(static_cast<double>(a[i]) * b[i]);
    }
    for (const auto* k : variants()) {
      CHECK(std::abs(k->dot_f32(a.data(), b.data(), n) - ref) <= 1e-5 * (mag + 1.0));
      std::vector<float> y = b;
      k->axpy_f32(0.5f, a.data(), y.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(b[i] + 0.5f * a[i]).epsilon(1e-6));
    }
  }
}
