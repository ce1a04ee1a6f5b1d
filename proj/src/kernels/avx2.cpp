// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include "ctxlab/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define CTXLAB_HAVE_AVX2 1
#endif

namespace ctxlab::kernels {

#ifdef CTXLAB_HAVE_AVX2
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8),
                           _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float acc = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(
        y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void linear_avx2(const float* x, const float* w, const float* b, float* y,
                 std::size_t in, std::size_t out) {
  std::size_t o = 0;
  // 32-wide column blocks kept in registers across the input loop.
  for (; o + 32 <= out; o += 32) {
    __m256 a0, a1, a2, a3;
    if (b) {
      a0 = _mm256_loadu_ps(b + o);
      a1 = _mm256_loadu_ps(b + o + 8);
      a2 = _mm256_loadu_ps(b + o + 16);
      a3 = _mm256_loadu_ps(b + o + 24);
    } else {
      a0 = a1 = a2 = a3 = _mm256_setzero_ps();
    }
    for (std::size_t i = 0; i < in; ++i) {
      const __m256 xi = _mm256_set1_ps(x[i]);
      const float* row = w + i * out + o;
      a0 = _mm256_fmadd_ps(xi, _mm256_loadu_ps(row), a0);
      a1 = _mm256_fmadd_ps(xi, _mm256_loadu_ps(row + 8), a1);
      a2 = _mm256_fmadd_ps(xi, _mm256_loadu_ps(row + 16), a2);
      a3 = _mm256_fmadd_ps(xi, _mm256_loadu_ps(row + 24), a3);
    }
    _mm256_storeu_ps(y + o, a0);
    _mm256_storeu_ps(y + o + 8, a1);
    _mm256_storeu_ps(y + o + 16, a2);
    _mm256_storeu_ps(y + o + 24, a3);
  }
  for (; o + 8 <= out; o += 8) {
    __m256 a0 = b ? _mm256_loadu_ps(b + o) : _mm256_setzero_ps();
    for (std::size_t i = 0; i < in; ++i) {
      a0 = _mm256_fmadd_ps(_mm256_set1_ps(x[i]), _mm256_loadu_ps(w + i * out + o),
                           a0);
    }
    _mm256_storeu_ps(y + o, a0);
  }
  for (; o < out; ++o) {
    float acc = b ? b[o] : 0.0f;
    for (std::size_t i = 0; i < in; ++i) acc += x[i] * w[i * out + o];
    y[o] = acc;
  }
}

void linear_input_grad_avx2(const float* w, const float* dy, float* dx,
                            std::size_t in, std::size_t out) {
  for (std::size_t i = 0; i < in; ++i) dx[i] += dot_avx2(w + i * out, dy, out);
}

void outer_acc_avx2(const float* x, const float* dy, float* dw, std::size_t in,
                    std::size_t out) {
  for (std::size_t i = 0; i < in; ++i) axpy_avx2(x[i], dy, dw + i * out, out);
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2", dot_avx2, axpy_avx2, linear_avx2,
                                 linear_input_grad_avx2, outer_acc_avx2};
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &table : nullptr;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace ctxlab::kernels
