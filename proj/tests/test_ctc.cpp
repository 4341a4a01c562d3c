// tests/test_ctc.cpp

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
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "testing.h"
#include "xmodal/core/errors.h"
#include "xmodal/core/finite_diff.h"
#include "xmodal/core/log_math.h"
#include "xmodal/ctc/ctc.h"

namespace xmodal {
namespace {

// Alphabet with n graphemes drawn from the head of the english set.
Alphabet tiny_alphabet(int n) {
  return Alphabet(std::string("abcdefghijklmnopqrstuvwxyz").substr(0, size_t(n)));
}

Matrix random_logits(std::mt19937_64& rng, size_t rows, size_t cols, double scale = 2.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

// Feasible random target over [0, num_labels).
std::vector<int> random_target(std::mt19937_64& rng, int num_labels, size_t max_len,
                               size_t max_frames) {
  std::uniform_int_distribution<size_t> len_dist(0, max_len);
  std::uniform_int_distribution<int> label_dist(0, num_labels - 1);
  while (true) {
    std::vector<int> target(len_dist(rng));
    for (int& id : target) id = label_dist(rng);
    if (min_frames_for_target(target) <= max_frames) return target;
  }
}

TEST_SUITE("ctc") {

TEST_CASE("collapse merges repeats then removes blanks") {
  const int B = 2;  // blank id for a two-label inventory {a=0, b=1}
  CHECK(collapse(std::vector<int>{0, B, 0, 1}, B) == std::vector<int>{0, 0, 1});  // "a-ab"
  CHECK(collapse(std::vector<int>{B, B}, B) == std::vector<int>{});               // "--"
  CHECK(collapse(std::vector<int>{0, 0, 1, B, 1}, B) == std::vector<int>{0, 1, 1});  // "aab-b"
  CHECK(collapse(std::vector<int>{}, B) == std::vector<int>{});
}

TEST_CASE("collapse is idempotent on blank-free input") {
  // Blank-separated repeats make a second application lossy in general
  // ("a-a" collapses to "aa" and then to "a"), so the property is stated
  // for inputs without blanks.
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> label(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> path(12);
    for (int& id : path) id = label(rng);  // blank (3) never drawn
    auto once = collapse(path, 3);
    CHECK(collapse(once, 3) == once);
  }
}

TEST_CASE("minimum frame count includes separating blanks") {
  CHECK(min_frames_for_target(std::vector<int>{}) == 0);
  CHECK(min_frames_for_target(std::vector<int>{0, 1}) == 2);
  CHECK(min_frames_for_target(std::vector<int>{0, 0}) == 3);
  CHECK(min_frames_for_target(std::vector<int>{0, 0, 0}) == 5);
}

TEST_CASE("brute-force log-prob on the two-frame uniform grid") {
  const Alphabet a = tiny_alphabet(1);
  Matrix uniform(2, 2, std::log(0.5));
  const PosteriorGrid grid(a, uniform);
  // Paths aa, a-, -a collapse to "a": 3 of 4 paths at probability 1/4.
  CHECK(ctc_logprob_bruteforce(grid, std::vector<int>{0}) ==
        doctest::Approx(std::log(0.75)).epsilon(1e-12));
  // "aa" needs a separating blank: minimum path length 3 > T=2.
  CHECK(ctc_logprob_bruteforce(grid, std::vector<int>{0, 0}) == kNegInf);
  // Only the all-blank path collapses to the empty target.
  CHECK(ctc_logprob_bruteforce(grid, std::vector<int>{}) ==
        doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("brute-force enumeration guard") {
  const Alphabet small = tiny_alphabet(1);
  const PosteriorGrid long_grid(small, Matrix(13, 2, std::log(0.5)));
  CHECK_THROWS_AS(ctc_logprob_bruteforce(long_grid, std::vector<int>{0}), InstanceTooLargeError);
  const Alphabet wide = tiny_alphabet(5);  // |C'| = 6
  Matrix rows(2, 6, std::log(1.0 / 6.0));
  const PosteriorGrid wide_grid(wide, rows);
  CHECK_THROWS_AS(ctc_logprob_bruteforce(wide_grid, std::vector<int>{0}), InstanceTooLargeError);
}

TEST_CASE("uniform logits reproduce the brute-force example") {
  Matrix logits(2, 2, 0.0);
  const auto result = ctc_loss(logits, std::vector<int>{0});
  CHECK(result.loss == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
}

TEST_CASE("strongly peaked logits drive the loss toward zero") {
  // T=3, C={a,b}: peak the path "a-b" at +20.
  Matrix logits(3, 3, 0.0);
  logits.at(0, 0) = 20.0;
  logits.at(1, 2) = 20.0;
  logits.at(2, 1) = 20.0;
  const auto result = ctc_loss(logits, std::vector<int>{0, 1});
  CHECK(result.loss >= 0.0);
  CHECK(result.loss <= 1e-6);
}

TEST_CASE("infeasible targets raise instead of returning infinity") {
  Matrix logits(2, 2, 0.0);
  try {
    ctc_loss(logits, std::vector<int>{0, 0});
    FAIL("expected InfeasibleTargetError");
  } catch (const InfeasibleTargetError& e) {
    CHECK(e.target_len == 2);
    CHECK(e.min_frames == 3);
    CHECK(e.frames == 2);
  }
}

TEST_CASE("loss rejects non-finite logits and foreign label ids") {
  Matrix bad(2, 3, 0.0);
  bad.at(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(ctc_loss(bad, std::vector<int>{0}), Error);
  Matrix ok(2, 3, 0.0);
  CHECK_THROWS_AS(ctc_loss(ok, std::vector<int>{2}), Error);   // blank id in target
  CHECK_THROWS_AS(ctc_loss(ok, std::vector<int>{-1}), Error);
}

TEST_CASE("empty target reduces to the all-blank path") {
  std::mt19937_64 rng(41);
  Matrix logits = random_logits(rng, 4, 3);
  const Matrix logp = log_softmax_rows(logits);
  double want = 0.0;
  for (size_t t = 0; t < 4; ++t) want -= logp.at(t, 2);
  const auto result = ctc_loss(logits, std::vector<int>{});
  CHECK(result.loss == doctest::Approx(want).epsilon(1e-12));
  for (size_t t = 0; t < 4; ++t)
    CHECK(result.occupancy.at(t, 2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("forward-backward equals the brute-force oracle on 200 random instances") {
  std::mt19937_64 rng(0xc7c);
  std::uniform_int_distribution<size_t> frames_dist(1, 6);
  std::uniform_int_distribution<int> labels_dist(1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t num_frames = frames_dist(rng);
    const int num_labels = labels_dist(rng);
    const Alphabet a = tiny_alphabet(num_labels);
    const Matrix logits = random_logits(rng, num_frames, size_t(a.num_classes()));
    const auto target = random_target(rng, num_labels, 4, num_frames);

    const auto result = ctc_loss(logits, target);
    const PosteriorGrid grid(a, log_softmax_rows(logits));
    const double oracle = ctc_logprob_bruteforce(grid, target);
    CHECK(std::abs(result.loss - (-oracle)) <= 1e-9);
  }
}

TEST_CASE("occupancy rows sum to 1 and gradient rows sum to 0") {
  std::mt19937_64 rng(0x0cc);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix logits = random_logits(rng, 7, 4);
    const auto target = random_target(rng, 3, 4, 7);
    const auto result = ctc_loss(logits, target);
    for (size_t t = 0; t < logits.rows(); ++t) {
      double occ = 0.0, grad = 0.0;
      for (size_t c = 0; c < logits.cols(); ++c) {
        occ += result.occupancy.at(t, c);
        grad += result.grad_logits.at(t, c);
      }
      CHECK(occ == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(std::abs(grad) <= 1e-9);
    }
  }
}

TEST_CASE("analytic gradient matches finite differences") {
  std::mt19937_64 rng(0x9ad);
  for (int trial = 0; trial < 5; ++trial) {
    const size_t num_frames = 5, num_classes = 4;
    Matrix logits = random_logits(rng, num_frames, num_classes, 1.0);
    const std::vector<int> target = random_target(rng, 3, 3, num_frames);

    const auto result = ctc_loss(logits, target);
    auto f = [&](std::span<const double> x) {
      Matrix m(num_frames, num_classes);
      std::copy(x.begin(), x.end(), m.data().begin());
      return ctc_loss(m, target).loss;
    };
    const auto fd = finite_diff_grad(f, logits.data(), 1e-6);
    for (size_t i = 0; i < fd.size(); ++i) {
      const double got = result.grad_logits.data()[i];
      const double denom = std::max({std::abs(fd[i]), std::abs(got), 1e-3});
      CHECK(std::abs(got - fd[i]) / denom <= 1e-5);
    }
  }
}

TEST_CASE("output probabilities over all collapsible targets sum to 1") {
  std::mt19937_64 rng(0x70b);
  for (int trial = 0; trial < 3; ++trial) {
    const size_t num_frames = 4;
    const Alphabet a = tiny_alphabet(2);
    const PosteriorGrid grid(a, log_softmax_rows(random_logits(rng, num_frames, 3)));

    // Every possible output has length <= T; enumerate label sequences of
    // length 0..T over C and sum their path masses.
    double total = 0.0;
    std::vector<int> target;
    auto visit = [&](auto&& self) -> void {
      total += std::exp(ctc_logprob_bruteforce(grid, target));
      if (target.size() == num_frames) return;
      for (int id = 0; id < a.size(); ++id) {
        target.push_back(id);
        self(self);
        target.pop_back();
      }
    };
    visit(visit);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

}  // TEST_SUITE

}  // namespace
}  // namespace xmodal
