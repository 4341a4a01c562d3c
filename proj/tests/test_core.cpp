// tests/test_core.cpp

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

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "testing.h"
#include "xmodal/core/alphabet.h"
#include "xmodal/core/errors.h"
#include "xmodal/core/finite_diff.h"
#include "xmodal/core/log_math.h"
#include "xmodal/core/matrix.h"
#include "xmodal/core/posterior_grid.h"
#include "xmodal/core/rng.h"

namespace xmodal {
namespace {

TEST_SUITE("core") {

TEST_CASE("log_add handles -inf and agrees with the direct formula") {
  CHECK(log_add(kNegInf, kNegInf) == kNegInf);
  CHECK(log_add(kNegInf, -2.5) == -2.5);
  CHECK(log_add(-2.5, kNegInf) == -2.5);
  // log(0.5 + 0.5) = 0, exact cancellation case.
  CHECK(log_add(std::log(0.5), std::log(0.5)) == doctest::Approx(0.0).epsilon(1e-14));
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    auto v = testing::random_vector(rng, 2, -20.0, 3.0);
    const double direct = std::log(std::exp(v[0]) + std::exp(v[1]));
    CHECK(log_add(v[0], v[1]) == doctest::Approx(direct).epsilon(1e-13));
    CHECK(log_add(v[0], v[1]) == log_add(v[1], v[0]));
  }
}

TEST_CASE("log_sum_exp of an empty span is -inf, of all -inf is -inf") {
  CHECK(log_sum_exp({}) == kNegInf);
  std::vector<double> v(4, kNegInf);
  CHECK(log_sum_exp(v) == kNegInf);
}

TEST_CASE("log_sum_exp is invariant under constant shifts") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    auto v = testing::random_vector(rng, 8, -10.0, 0.0);
    const double base = log_sum_exp(v);
    for (double c : {1000.0, -1000.0, 3.25}) {
      auto shifted = v;
      for (double& x : shifted) x += c;
      CHECK(log_sum_exp(shifted) == doctest::Approx(base + c).epsilon(1e-12));
    }
  }
}

TEST_CASE("log_sum_exp does not overflow where the naive sum would") {
  std::vector<double> v = {710.0, 709.0};
  // 710 + log(1 + e^-1)
  CHECK(log_sum_exp(v) == doctest::Approx(710.0 + std::log1p(std::exp(-1.0))));
}

TEST_CASE("log_softmax rows normalize to zero and shift invariance holds") {
  std::mt19937_64 rng(13);
  auto v = testing::random_vector(rng, 9, -5.0, 5.0);
  auto s = log_softmax(v);
  CHECK(log_sum_exp(s) == doctest::Approx(0.0).epsilon(1e-12));
  auto shifted = v;
  for (double& x : shifted) x += 42.0;
  auto s2 = log_softmax(shifted);
  for (size_t i = 0; i < s.size(); ++i) CHECK(s2[i] == doctest::Approx(s[i]).epsilon(1e-12));
  // Uniform two-way case: both entries -log 2.
  auto u = log_softmax(std::vector<double>{3.0, 3.0});
  CHECK(u[0] == doctest::Approx(-std::log(2.0)));
  CHECK(u[1] == doctest::Approx(-std::log(2.0)));
}

TEST_CASE("log_softmax_rows matches the vector form row by row") {
  Matrix logits = Matrix::from_rows({{0.5, -1.0, 2.0}, {0.0, 0.0, 0.0}});
  Matrix out = log_softmax_rows(logits);
  for (size_t r = 0; r < logits.rows(); ++r) {
    auto expect = log_softmax(std::vector<double>(logits.row(r).begin(), logits.row(r).end()));
    for (size_t c = 0; c < logits.cols(); ++c)
      CHECK(out.at(r, c) == doctest::Approx(expect[c]).epsilon(1e-14));
  }
}

TEST_CASE("default english alphabet layout") {
  const Alphabet a = Alphabet::default_english();
  CHECK(a.size() == 28);
  CHECK(a.num_classes() == 29);
  CHECK(a.blank_id() == 28);
  CHECK(a.id_of('a') == 0);
  CHECK(a.id_of('z') == 25);
  CHECK(a.id_of(' ') == 26);
  CHECK(a.id_of('\'') == 27);
  CHECK(!a.id_of('?').has_value());
  CHECK(a.grapheme(26) == ' ');
}

TEST_CASE("encode folds case and reports the offending character") {
  const Alphabet a = Alphabet::default_english();
  CHECK(a.encode("Cat") == std::vector<int>{2, 0, 19});
  try {
    a.encode("abc?d");
    FAIL("expected OutOfAlphabetError");
  } catch (const OutOfAlphabetError& e) {
    CHECK(e.character == '?');
    CHECK(e.position == 3);
  }
}

TEST_CASE("ignorable characters are dropped without shifting error positions") {
  const Alphabet a("abc", ".,");
  CHECK(a.encode("a.b,c") == std::vector<int>{0, 1, 2});
  try {
    a.encode("a.b!");
    FAIL("expected OutOfAlphabetError");
  } catch (const OutOfAlphabetError& e) {
    CHECK(e.character == '!');
    CHECK(e.position == 3);
  }
}

TEST_CASE("render is the inverse of encode") {
  const Alphabet a = Alphabet::default_english();
  const std::string text = "the cat's mat";
  CHECK(a.render(a.encode(text)) == text);
}

TEST_CASE("alphabet rejects duplicate graphemes and empty inventories") {
  CHECK_THROWS_AS(Alphabet("aba"), ConfigError);
  // Upper-case input is folded, so "aA" collapses to a duplicate.
  CHECK_THROWS_AS(Alphabet("aA"), ConfigError);
  CHECK_THROWS_AS(Alphabet(""), ConfigError);
  CHECK(Alphabet("AB") == Alphabet("ab"));
}

TEST_CASE("alphabet save/load round trip") {
  testing::TempDir tmp;
  const Alphabet a = Alphabet::default_english();
  a.save(tmp.file("alphabet.txt"));
  const Alphabet b = Alphabet::load(tmp.file("alphabet.txt"));
  CHECK(a == b);
  CHECK(b.blank_id() == 28);
}

TEST_CASE("posterior grid accepts normalized rows and rejects drifted ones") {
  const Alphabet a("ab");
  Matrix ok(2, 3);
  for (size_t t = 0; t < 2; ++t) {
    auto row = log_softmax(std::vector<double>{0.1, -0.2, 0.3});
    for (size_t c = 0; c < 3; ++c) ok.at(t, c) = row[c];
  }
  CHECK_NOTHROW(PosteriorGrid(a, ok));

  Matrix drifted = ok;
  drifted.at(0, 0) += 1e-5;
  CHECK_THROWS_AS(PosteriorGrid(a, drifted), FormatError);

  // Within tolerance the row is renormalized back to exactly zero mass.
  const PosteriorGrid g = PosteriorGrid::with_renormalization(a, drifted, 1e-4);
  CHECK(log_sum_exp(g.log_probs().row(0)) == doctest::Approx(0.0).epsilon(1e-12));

  Matrix far = ok;
  far.at(0, 0) += 0.5;
  CHECK_THROWS_AS(PosteriorGrid::with_renormalization(a, far, 1e-4), FormatError);
}

TEST_CASE("posterior grid allows -inf entries (hard one-hot frames)") {
  const Alphabet a("ab");
  Matrix hard(1, 3, kNegInf);
  hard.at(0, 1) = 0.0;
  const PosteriorGrid g(a, hard);
  CHECK(g.log_prob(0, 1) == 0.0);
  CHECK(g.log_prob(0, 0) == kNegInf);
}

TEST_CASE("matrix log-domain validity") {
  Matrix m = Matrix::from_rows({{0.0, kNegInf}});
  CHECK(m.is_log_domain_valid());
  m.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(!m.is_log_domain_valid());
  Matrix p = Matrix::from_rows({{std::numeric_limits<double>::infinity()}});
  CHECK(!p.is_log_domain_valid());
  CHECK_THROWS_AS(Matrix::from_rows({{1.0, 2.0}, {3.0}}), ShapeMismatchError);
}

TEST_CASE("finite differences recover the gradient of a quadratic") {
  auto f = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  std::vector<double> x = {0.3, -1.2, 2.0};
  auto g = finite_diff_grad(f, x, 1e-5);
  REQUIRE(g.size() == 3);
  for (size_t i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(2.0 * x[i]).epsilon(1e-8));
  CHECK_THROWS_AS(finite_diff_grad(f, x, 0.0), ConfigError);
}

TEST_CASE("splitmix64 reference vector and seed mixing") {
  // First output of the published splitmix64 for seed 0.
  CHECK(splitmix64(0) == 0xE220A8397B1DCDAFULL);
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(5, 9) == mix_seed(5, 9));
}

TEST_CASE("split_words tokenizes on runs of whitespace") {
  CHECK(split_words("  the\tcat  sat ") == std::vector<std::string>{"the", "cat", "sat"});
  CHECK(split_words("").empty());
  CHECK(split_words(" \t\n").empty());
}

}  // TEST_SUITE

}  // namespace
}  // namespace xmodal
