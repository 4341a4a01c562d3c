// tests/test_kernels.cpp

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

#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "testing.h"
#include "xmodal/kernels/kernels.h"

namespace xmodal::kernels {
namespace {

// Double-precision mirrors of the three gemm contracts, written
// independently of the float kernels under test.
void gemm_nn_oracle(size_t m, size_t n, size_t k, const std::vector<float>& a, size_t lda,
                    const std::vector<float>& b, size_t ldb, std::vector<double>& c, size_t ldc) {
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (size_t p = 0; p < k; ++p) s += double(a[i * lda + p]) * double(b[p * ldb + j]);
      c[i * ldc + j] += s;
    }
}

void gemm_tn_oracle(size_t m, size_t n, size_t k, const std::vector<float>& a, size_t lda,
                    const std::vector<float>& b, size_t ldb, std::vector<double>& c, size_t ldc) {
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (size_t p = 0; p < k; ++p) s += double(a[p * lda + i]) * double(b[p * ldb + j]);
      c[i * ldc + j] += s;
    }
}

void gemm_nt_oracle(size_t m, size_t n, size_t k, const std::vector<float>& a, size_t lda,
                    const std::vector<float>& b, size_t ldb, std::vector<double>& c, size_t ldc) {
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (size_t p = 0; p < k; ++p) s += double(a[i * lda + p]) * double(b[j * ldb + p]);
      c[i * ldc + j] += s;
    }
}

std::vector<const Backend*> backends_under_test() {
  std::vector<const Backend*> list = {&scalar_backend()};
  if (const Backend* avx2 = avx2_backend()) list.push_back(avx2);
  return list;
}

struct GemmCase {
  size_t m, n, k;
};

// Sizes straddle the 8 and 16 lane boundaries and include degenerate dims.
const GemmCase kGemmCases[] = {
    {1, 1, 1}, {2, 3, 4},   {3, 8, 5},   {2, 16, 7},  {5, 17, 9},
    {7, 15, 8}, {8, 33, 16}, {16, 24, 31}, {1, 40, 64}, {9, 63, 2},
};

void check_gemm(void (*op)(size_t, size_t, size_t, const float*, size_t, const float*, size_t,
                           float*, size_t),
                void (*oracle)(size_t, size_t, size_t, const std::vector<float>&, size_t,
                               const std::vector<float>&, size_t, std::vector<double>&, size_t),
                bool a_is_kxm, bool b_is_nxk) {
  std::mt19937_64 rng(0x5eed);
  for (const auto& g : kGemmCases) {
    // Leading dimensions deliberately exceed the row widths.
    const size_t lda = (a_is_kxm ? g.m : g.k) + 3;
    const size_t ldb = (b_is_nxk ? g.k : g.n) + 5;
    const size_t ldc = g.n + 2;
    const size_t a_rows = a_is_kxm ? g.k : g.m;
    const size_t b_rows = b_is_nxk ? g.n : g.k;
    auto a = testing::random_floats(rng, a_rows * lda);
    auto b = testing::random_floats(rng, b_rows * ldb);
    auto c0 = testing::random_floats(rng, g.m * ldc);

    std::vector<float> c(c0);
    op(g.m, g.n, g.k, a.data(), lda, b.data(), ldb, c.data(), ldc);

    std::vector<double> want(c0.begin(), c0.end());
    oracle(g.m, g.n, g.k, a, lda, b, ldb, want, ldc);

    const double tol = 1e-5 * double(g.k + 1);
    for (size_t i = 0; i < g.m; ++i)
      for (size_t j = 0; j < ldc; ++j) {
        const size_t idx = i * ldc + j;
        if (j < g.n) {
          CHECK(std::abs(double(c[idx]) - want[idx]) <= tol);
        } else {
          // Padding between rows must stay untouched.
          CHECK(c[idx] == c0[idx]);
        }
      }
  }
}

TEST_SUITE("kernels") {

TEST_CASE("backend listing always contains the scalar reference") {
  auto list = backends_under_test();
  REQUIRE(!list.empty());
  CHECK(std::string(list[0]->name) == "scalar");
  const Backend& act = active();
  CHECK((std::string(act.name) == "scalar" || std::string(act.name) == "avx2"));
}

TEST_CASE("dot agrees with a double-precision accumulation") {
  std::mt19937_64 rng(21);
  for (const Backend* be : backends_under_test()) {
    CAPTURE(be->name);
    for (size_t n : {size_t(0), size_t(1), size_t(7), size_t(8), size_t(9), size_t(64),
                     size_t(301)}) {
      auto a = testing::random_floats(rng, n);
      auto b = testing::random_floats(rng, n);
      double want = 0.0;
      for (size_t i = 0; i < n; ++i) want += double(a[i]) * double(b[i]);
      CHECK(std::abs(double(be->dot(a.data(), b.data(), n)) - want) <= 1e-5 * double(n + 1));
    }
  }
}

TEST_CASE("axpy accumulates in place with a scalar multiplier") {
  std::mt19937_64 rng(22);
  for (const Backend* be : backends_under_test()) {
    CAPTURE(be->name);
    for (size_t n : {size_t(1), size_t(8), size_t(19)}) {
      auto x = testing::random_floats(rng, n);
      auto y0 = testing::random_floats(rng, n);
      auto y = y0;
      be->axpy(0.75f, x.data(), y.data(), n);
      for (size_t i = 0; i < n; ++i)
        CHECK(double(y[i]) == doctest::Approx(double(y0[i]) + 0.75 * double(x[i])).epsilon(1e-6));
    }
  }
}

TEST_CASE("gemm_nn accumulates C += A B over strided buffers") {
  for (const Backend* be : backends_under_test()) {
    CAPTURE(be->name);
    check_gemm(be->gemm_nn, gemm_nn_oracle, false, false);
  }
}

TEST_CASE("gemm_tn accumulates C += A^T B over strided buffers") {
  for (const Backend* be : backends_under_test()) {
    CAPTURE(be->name);
    check_gemm(be->gemm_tn, gemm_tn_oracle, true, false);
  }
}

TEST_CASE("gemm_nt accumulates C += A B^T over strided buffers") {
  for (const Backend* be : backends_under_test()) {
    CAPTURE(be->name);
    check_gemm(be->gemm_nt, gemm_nt_oracle, false, true);
  }
}

TEST_CASE("scalar and vector backends agree on the same gemm inputs") {
  const Backend* avx2 = avx2_backend();
  if (avx2 == nullptr) return;  // nothing to compare on this host
  std::mt19937_64 rng(23);
  const size_t m = 13, n = 37, k = 29;
  auto a = testing::random_floats(rng, m * k);
  auto b = testing::random_floats(rng, k * n);
  std::vector<float> c_scalar(m * n, 0.5f), c_avx2(m * n, 0.5f);
  scalar_backend().gemm_nn(m, n, k, a.data(), k, b.data(), n, c_scalar.data(), n);
  avx2->gemm_nn(m, n, k, a.data(), k, b.data(), n, c_avx2.data(), n);
  for (size_t i = 0; i < m * n; ++i)
    CHECK(std::abs(double(c_scalar[i]) - double(c_avx2[i])) <= 1e-5 * double(k));
}

TEST_CASE("relu clamps negatives and relu_grad gates on the activation") {
  for (const Backend* be : backends_under_test()) {
    CAPTURE(be->name);
    std::vector<float> x = {-2.0f, -0.0f, 0.0f, 1.5f, -1e-8f, 3.0f, -7.0f, 0.25f, -0.5f};
    be->relu(x.data(), x.size());
    for (float v : x) CHECK(v >= 0.0f);
    CHECK(x[0] == 0.0f);
    CHECK(x[3] == 1.5f);
    CHECK(x[8] == 0.0f);

    std::vector<float> out = {0.0f, 2.0f, 0.0f, 1.0f, 0.5f, 0.0f, 3.0f, 0.0f, 4.0f};
    std::vector<float> grad = {1.0f, 1.0f, -2.0f, 3.0f, 4.0f, 5.0f, -6.0f, 7.0f, 8.0f};
    be->relu_grad(grad.data(), out.data(), grad.size());
    CHECK(grad[0] == 0.0f);
    CHECK(grad[1] == 1.0f);
    CHECK(grad[2] == 0.0f);
    CHECK(grad[3] == 3.0f);
    CHECK(grad[5] == 0.0f);
    CHECK(grad[6] == -6.0f);
    CHECK(grad[7] == 0.0f);
  }
}

}  // TEST_SUITE

}  // namespace
}  // namespace xmodal::kernels
