// xmodal/kernels/kernels_avx2.cc

// Copyright 2026  The xmodal authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// This translation unit is the only one compiled with -mavx2 -mfma; the
// rest of the library stays at the baseline ISA and reaches these kernels
// through the dispatch table.

#include "xmodal/kernels/kernels.h"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace xmodal::kernels {

namespace {

inline float hsum8(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

float dot_avx2(const float* a, const float* b, size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float acc = hsum8(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(float alpha, const float* x, float* y, size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// 2 rows of A x 16 columns of C stay in registers across the full K loop.
void gemm_nn_avx2(size_t m, size_t n, size_t k, const float* a, size_t lda,
                  const float* b, size_t ldb, float* c, size_t ldc) {
  size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const float* a0 = a + i * lda;
    const float* a1 = a0 + lda;
    float* c0 = c + i * ldc;
    float* c1 = c0 + ldc;
    size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256 r00 = _mm256_loadu_ps(c0 + j);
      __m256 r01 = _mm256_loadu_ps(c0 + j + 8);
      __m256 r10 = _mm256_loadu_ps(c1 + j);
      __m256 r11 = _mm256_loadu_ps(c1 + j + 8);
      for (size_t p = 0; p < k; ++p) {
        const float* brow = b + p * ldb + j;
        const __m256 b0 = _mm256_loadu_ps(brow);
        const __m256 b1 = _mm256_loadu_ps(brow + 8);
        const __m256 v0 = _mm256_set1_ps(a0[p]);
        const __m256 v1 = _mm256_set1_ps(a1[p]);
        r00 = _mm256_fmadd_ps(v0, b0, r00);
        r01 = _mm256_fmadd_ps(v0, b1, r01);
        r10 = _mm256_fmadd_ps(v1, b0, r10);
        r11 = _mm256_fmadd_ps(v1, b1, r11);
      }
      _mm256_storeu_ps(c0 + j, r00);
      _mm256_storeu_ps(c0 + j + 8, r01);
      _mm256_storeu_ps(c1 + j, r10);
      _mm256_storeu_ps(c1 + j + 8, r11);
    }
    for (; j + 8 <= n; j += 8) {
      __m256 r0 = _mm256_loadu_ps(c0 + j);
      __m256 r1 = _mm256_loadu_ps(c1 + j);
      for (size_t p = 0; p < k; ++p) {
        const __m256 bv = _mm256_loadu_ps(b + p * ldb + j);
        r0 = _mm256_fmadd_ps(_mm256_set1_ps(a0[p]), bv, r0);
        r1 = _mm256_fmadd_ps(_mm256_set1_ps(a1[p]), bv, r1);
      }
      _mm256_storeu_ps(c0 + j, r0);
      _mm256_storeu_ps(c1 + j, r1);
    }
    for (; j < n; ++j) {
      float s0 = c0[j], s1 = c1[j];
      for (size_t p = 0; p < k; ++p) {
        s0 += a0[p] * b[p * ldb + j];
        s1 += a1[p] * b[p * ldb + j];
      }
      c0[j] = s0;
      c1[j] = s1;
    }
  }
  if (i < m) {
    const float* a0 = a + i * lda;
    float* c0 = c + i * ldc;
    size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256 r0 = _mm256_loadu_ps(c0 + j);
      for (size_t p = 0; p < k; ++p)
        r0 = _mm256_fmadd_ps(_mm256_set1_ps(a0[p]), _mm256_loadu_ps(b + p * ldb + j), r0);
      _mm256_storeu_ps(c0 + j, r0);
    }
    for (; j < n; ++j) {
      float s = c0[j];
      for (size_t p = 0; p < k; ++p) s += a0[p] * b[p * ldb + j];
      c0[j] = s;
    }
  }
}

// Same register blocking as gemm_nn; A is addressed column-wise.
void gemm_tn_avx2(size_t m, size_t n, size_t k, const float* a, size_t lda,
                  const float* b, size_t ldb, float* c, size_t ldc) {
  size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    float* c0 = c + i * ldc;
    float* c1 = c0 + ldc;
    size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256 r00 = _mm256_loadu_ps(c0 + j);
      __m256 r01 = _mm256_loadu_ps(c0 + j + 8);
      __m256 r10 = _mm256_loadu_ps(c1 + j);
      __m256 r11 = _mm256_loadu_ps(c1 + j + 8);
      for (size_t p = 0; p < k; ++p) {
        const float* arow = a + p * lda + i;
        const float* brow = b + p * ldb + j;
        const __m256 b0 = _mm256_loadu_ps(brow);
        const __m256 b1 = _mm256_loadu_ps(brow + 8);
        const __m256 v0 = _mm256_set1_ps(arow[0]);
        const __m256 v1 = _mm256_set1_ps(arow[1]);
        r00 = _mm256_fmadd_ps(v0, b0, r00);
        r01 = _mm256_fmadd_ps(v0, b1, r01);
        r10 = _mm256_fmadd_ps(v1, b0, r10);
        r11 = _mm256_fmadd_ps(v1, b1, r11);
      }
      _mm256_storeu_ps(c0 + j, r00);
      _mm256_storeu_ps(c0 + j + 8, r01);
      _mm256_storeu_ps(c1 + j, r10);
      _mm256_storeu_ps(c1 + j + 8, r11);
    }
    for (; j < n; ++j) {
      float s0 = c0[j], s1 = c1[j];
      for (size_t p = 0; p < k; ++p) {
        s0 += a[p * lda + i] * b[p * ldb + j];
        s1 += a[p * lda + i + 1] * b[p * ldb + j];
      }
      c0[j] = s0;
      c1[j] = s1;
    }
  }
  if (i < m) {
    float* c0 = c + i * ldc;
    size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256 r0 = _mm256_loadu_ps(c0 + j);
      for (size_t p = 0; p < k; ++p)
        r0 = _mm256_fmadd_ps(_mm256_set1_ps(a[p * lda + i]),
                             _mm256_loadu_ps(b + p * ldb + j), r0);
      _mm256_storeu_ps(c0 + j, r0);
    }
    for (; j < n; ++j) {
      float s = c0[j];
      for (size_t p = 0; p < k; ++p) s += a[p * lda + i] * b[p * ldb + j];
      c0[j] = s;
    }
  }
}

void gemm_nt_avx2(size_t m, size_t n, size_t k, const float* a, size_t lda,
                  const float* b, size_t ldb, float* c, size_t ldc) {
  for (size_t i = 0; i < m; ++i) {
    const float* arow = a + i * lda;
    float* crow = c + i * ldc;
    for (size_t j = 0; j < n; ++j) crow[j] += dot_avx2(arow, b + j * ldb, k);
  }
}

void relu_avx2(float* x, size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, _mm256_max_ps(zero, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i)
    if (x[i] < 0.0f) x[i] = 0.0f;
}

void relu_grad_avx2(float* grad, const float* out, size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(out + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(grad + i, _mm256_and_ps(_mm256_loadu_ps(grad + i), mask));
  }
  for (; i < n; ++i)
    if (out[i] <= 0.0f) grad[i] = 0.0f;
}

const Backend kAvx2Backend = {
    "avx2",       dot_avx2,     axpy_avx2, gemm_nn_avx2,
    gemm_tn_avx2, gemm_nt_avx2, relu_avx2, relu_grad_avx2,
};

}  // namespace

const Backend* avx2_backend() {
  static const Backend* backend = []() -> const Backend* {
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
      return &kAvx2Backend;
    return nullptr;
  }();
  return backend;
}

}  // namespace xmodal::kernels

#else  // no AVX2/FMA at compile time: dispatch always falls back to scalar

namespace xmodal::kernels {
const Backend* avx2_backend() { return nullptr; }
}  // namespace xmodal::kernels

#endif
