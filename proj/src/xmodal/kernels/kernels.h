// xmodal/kernels/kernels.h

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

#pragma once

#include <cstddef>

namespace xmodal::kernels {

// Single-precision inner loops behind the convolution layers. Scalar
// reference implementations always exist; an AVX2/FMA variant of each is
// selected at runtime when the CPU supports it. All matrices are row-major
// with explicit leading dimensions so callers can address strided row
// blocks (the stride-2 transposed convolution needs ldc = 2 * row width).
//
// gemm_nn: C(MxN) += A(MxK) * B(KxN)
// gemm_tn: C(MxN) += A^T * B,  A is (KxM), B is (KxN)
// gemm_nt: C(MxN) += A * B^T,  A is (MxK), B is (NxK)
struct Backend {
  const char* name;
  float (*dot)(const float* a, const float* b, size_t n);
  void (*axpy)(float alpha, const float* x, float* y, size_t n);
  void (*gemm_nn)(size_t m, size_t n, size_t k, const float* a, size_t lda,
                  const float* b, size_t ldb, float* c, size_t ldc);
  void (*gemm_tn)(size_t m, size_t n, size_t k, const float* a, size_t lda,
                  const float* b, size_t ldb, float* c, size_t ldc);
  void (*gemm_nt)(size_t m, size_t n, size_t k, const float* a, size_t lda,
                  const float* b, size_t ldb, float* c, size_t ldc);
  void (*relu)(float* x, size_t n);
  void (*relu_grad)(float* grad, const float* out, size_t n);
};

const Backend& scalar_backend();

// nullptr when this build or CPU cannot run AVX2+FMA.
const Backend* avx2_backend();

// The backend in use: AVX2 when available, scalar otherwise.
// XMODAL_KERNELS=scalar in the environment forces the reference path.
const Backend& active();

}  // namespace xmodal::kernels
