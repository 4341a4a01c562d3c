// tests/test_distill.cpp

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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "testing.h"
#include "xmodal/core/errors.h"
#include "xmodal/core/finite_diff.h"
#include "xmodal/core/log_math.h"
#include "xmodal/distill/distill.h"

namespace xmodal {
namespace {

Matrix random_logits(std::mt19937_64& rng, size_t rows, size_t cols, double scale = 2.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

PosteriorGrid random_grid(std::mt19937_64& rng, const Alphabet& a, size_t rows) {
  return {a, log_softmax_rows(random_logits(rng, rows, size_t(a.num_classes())))};
}

double entropy(const PosteriorGrid& g) {
  double h = 0.0;
  for (size_t t = 0; t < g.frames(); ++t)
    for (int c = 0; c < g.alphabet().num_classes(); ++c) {
      const double lp = g.log_prob(t, c);
      if (lp > kNegInf) h -= std::exp(lp) * lp;
    }
  return h;
}

TEST_SUITE("distill") {

TEST_CASE("matched single-frame distributions cost exactly the teacher entropy") {
  const Alphabet a("a");  // |C'| = 2
  Matrix tlog = Matrix::from_rows({{std::log(0.9), std::log(0.1)}});
  const PosteriorGrid teacher(a, tlog);
  // Log-probabilities are legitimate logits; softmax reproduces the grid.
  const auto result = kd_loss(teacher, tlog);
  const double want = -(0.9 * std::log(0.9) + 0.1 * std::log(0.1));
  CHECK(result.loss == doctest::Approx(want).epsilon(1e-12));
  CHECK(result.loss == doctest::Approx(0.325083).epsilon(1e-5));
}

TEST_CASE("matching point masses cost nothing in the peaked limit") {
  const Alphabet a("a");
  Matrix one_hot(1, 2, kNegInf);
  one_hot.at(0, 0) = 0.0;
  const PosteriorGrid teacher(a, one_hot);
  Matrix peaked(1, 2, 0.0);
  peaked.at(0, 0) = 50.0;
  const auto result = kd_loss(teacher, peaked);
  CHECK(result.loss >= 0.0);
  CHECK(result.loss <= 1e-12);
}

TEST_CASE("uniform student costs ln 2 per frame over two classes") {
  const Alphabet a("a");
  std::mt19937_64 rng(51);
  const PosteriorGrid teacher = random_grid(rng, a, 3);
  Matrix uniform(3, 2, 0.0);
  const auto result = kd_loss(teacher, uniform);
  CHECK(result.loss == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("gibbs inequality: cross-entropy is minimized by the teacher itself") {
  std::mt19937_64 rng(52);
  const Alphabet a("abc");
  for (int trial = 0; trial < 50; ++trial) {
    const PosteriorGrid teacher = random_grid(rng, a, 5);
    Matrix self(5, 4);
    for (size_t t = 0; t < 5; ++t)
      for (size_t c = 0; c < 4; ++c) self.at(t, c) = teacher.log_prob(t, int(c));
    const double at_teacher = kd_loss(teacher, self).loss;
    CHECK(at_teacher == doctest::Approx(entropy(teacher)).epsilon(1e-9));

    const Matrix other = random_logits(rng, 5, 4);
    CHECK(kd_loss(teacher, other).loss >= at_teacher - 1e-9);
  }
}

TEST_CASE("kd gradient rows are exactly student minus teacher and sum to 0") {
  std::mt19937_64 rng(53);
  const Alphabet a("ab");
  const PosteriorGrid teacher = random_grid(rng, a, 4);
  const Matrix logits = random_logits(rng, 4, 3);
  const Matrix student_logp = log_softmax_rows(logits);
  const auto result = kd_loss(teacher, logits);
  for (size_t t = 0; t < 4; ++t) {
    double row_sum = 0.0;
    for (size_t c = 0; c < 3; ++c) {
      const double want = std::exp(student_logp.at(t, c)) - std::exp(teacher.log_prob(t, int(c)));
      CHECK(std::abs(result.grad_logits.at(t, c) - want) <= 1e-12);
      row_sum += result.grad_logits.at(t, c);
    }
    CHECK(std::abs(row_sum) <= 1e-12);
  }
}

TEST_CASE("kd gradient matches finite differences") {
  std::mt19937_64 rng(54);
  const Alphabet a("ab");
  const PosteriorGrid teacher = random_grid(rng, a, 3);
  const Matrix logits = random_logits(rng, 3, 3, 1.0);
  const auto result = kd_loss(teacher, logits);
  auto f = [&](std::span<const double> x) {
    Matrix m(3, 3);
    std::copy(x.begin(), x.end(), m.data().begin());
    return kd_loss(teacher, m).loss;
  };
  const auto fd = finite_diff_grad(f, logits.data(), 1e-6);
  for (size_t i = 0; i < fd.size(); ++i) {
    const double got = result.grad_logits.data()[i];
    const double denom = std::max({std::abs(fd[i]), std::abs(got), 1e-3});
    CHECK(std::abs(got - fd[i]) / denom <= 1e-5);
  }
}

TEST_CASE("kd rejects mismatched shapes") {
  std::mt19937_64 rng(55);
  const Alphabet a("ab");
  const PosteriorGrid teacher = random_grid(rng, a, 4);
  CHECK_THROWS_AS(kd_loss(teacher, Matrix(5, 3, 0.0)), ShapeMismatchError);
  CHECK_THROWS_AS(kd_loss(teacher, Matrix(4, 4, 0.0)), ShapeMismatchError);
}

TEST_CASE("combined loss is the weighted sum of its parts") {
  std::mt19937_64 rng(56);
  const Alphabet a("ab");
  const PosteriorGrid teacher = random_grid(rng, a, 6);
  const Matrix logits = random_logits(rng, 6, 3);
  const std::vector<int> target = {0, 1};
  const LossWeights weights;  // defaults 0.1 and 10

  const auto combined = combined_loss(teacher, logits, target, weights);
  CHECK(std::abs(combined.total -
                 (0.1 * combined.ctc_part + 10.0 * combined.kd_part)) <= 1e-12);
  // Worked example with these weights: parts (1.0, 0.5) combine to 5.1.
  CHECK(0.1 * 1.0 + 10.0 * 0.5 == doctest::Approx(5.1).epsilon(1e-15));

  const auto ctc_only = combined_loss(teacher, logits, target, {1.0, 0.0});
  const auto kd_only = combined_loss(teacher, logits, target, {0.0, 1.0});
  CHECK(ctc_only.total == ctc_only.ctc_part);
  CHECK(kd_only.total == kd_only.kd_part);
  const auto kd_direct = kd_loss(teacher, logits);
  CHECK(kd_only.total == kd_direct.loss);
  for (size_t i = 0; i < kd_direct.grad_logits.size(); ++i)
    CHECK(kd_only.grad_logits.data()[i] == kd_direct.grad_logits.data()[i]);
}

TEST_CASE("combined gradient is the weighted elementwise sum") {
  std::mt19937_64 rng(57);
  const Alphabet a("ab");
  const PosteriorGrid teacher = random_grid(rng, a, 5);
  const Matrix logits = random_logits(rng, 5, 3);
  const std::vector<int> target = {1, 0, 0};
  const LossWeights weights{0.1, 10.0};

  const auto combined = combined_loss(teacher, logits, target, weights);
  const auto ctc_only = combined_loss(teacher, logits, target, {1.0, 0.0});
  const auto kd_direct = kd_loss(teacher, logits);
  for (size_t i = 0; i < combined.grad_logits.size(); ++i) {
    const double want =
        0.1 * ctc_only.grad_logits.data()[i] + 10.0 * kd_direct.grad_logits.data()[i];
    CHECK(std::abs(combined.grad_logits.data()[i] - want) <= 1e-12);
  }
}

TEST_CASE("combined loss validates weights and propagates infeasibility") {
  std::mt19937_64 rng(58);
  const Alphabet a("ab");
  const PosteriorGrid teacher = random_grid(rng, a, 2);
  const Matrix logits = random_logits(rng, 2, 3);
  CHECK_THROWS_AS(combined_loss(teacher, logits, std::vector<int>{0}, {-0.1, 1.0}), ConfigError);
  CHECK_THROWS_AS(combined_loss(teacher, logits, std::vector<int>{0}, {0.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(combined_loss(teacher, logits, std::vector<int>{0, 0}, LossWeights{}),
                  InfeasibleTargetError);
}

}  // TEST_SUITE

}  // namespace
}  // namespace xmodal
