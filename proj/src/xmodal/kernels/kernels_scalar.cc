// xmodal/kernels/kernels_scalar.cc

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

#include <cstdlib>
#include <cstring>

#include "xmodal/kernels/kernels.h"

namespace xmodal::kernels {

namespace {

float dot_ref(const float* a, const float* b, size_t n) {
  float acc = 0.0f;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_ref(float alpha, const float* x, float* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn_ref(size_t m, size_t n, size_t k, const float* a, size_t lda,
                 const float* b, size_t ldb, float* c, size_t ldc) {
  for (size_t i = 0; i < m; ++i) {
    float* crow = c + i * ldc;
    const float* arow = a + i * lda;
    for (size_t p = 0; p < k; ++p) {
      const float av = arow[p];
      if (av == 0.0f) continue;
      const float* brow = b + p * ldb;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn_ref(size_t m, size_t n, size_t k, const float* a, size_t lda,
                 const float* b, size_t ldb, float* c, size_t ldc) {
  for (size_t p = 0; p < k; ++p) {
    const float* arow = a + p * lda;
    const float* brow = b + p * ldb;
    for (size_t i = 0; i < m; ++i) {
      const float av = arow[i];
      if (av == 0.0f) continue;
      float* crow = c + i * ldc;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt_ref(size_t m, size_t n, size_t k, const float* a, size_t lda,
                 const float* b, size_t ldb, float* c, size_t ldc) {
  for (size_t i = 0; i < m; ++i) {
    const float* arow = a + i * lda;
    float* crow = c + i * ldc;
    for (size_t j = 0; j < n; ++j) crow[j] += dot_ref(arow, b + j * ldb, k);
  }
}

void relu_ref(float* x, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (x[i] < 0.0f) x[i] = 0.0f;
}

void relu_grad_ref(float* grad, const float* out, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (out[i] <= 0.0f) grad[i] = 0.0f;
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend backend = {
      "scalar",   dot_ref,  axpy_ref,      gemm_nn_ref,
      gemm_tn_ref, gemm_nt_ref, relu_ref, relu_grad_ref,
  };
  return backend;
}

const Backend& active() {
  static const Backend& chosen = []() -> const Backend& {
    const char* env = std::getenv("XMODAL_KERNELS");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return scalar_backend();
    if (const Backend* avx2 = avx2_backend()) return *avx2;
    return scalar_backend();
  }();
  return chosen;
}

}  // namespace xmodal::kernels
