// tests/test_teacher.cpp

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
#include <cstring>
#include <limits>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "testing.h"
#include "xmodal/core/errors.h"
#include "xmodal/core/log_math.h"
#include "xmodal/ctc/ctc.h"
#include "xmodal/decode/decode.h"
#include "xmodal/teacher/teacher.h"

namespace xmodal {
namespace {

GenConfig small_config() {
  GenConfig config;
  config.num_utterances = 8;
  config.transcript_words = {1, 3};
  config.frames_per_grapheme = {1, 2};
  config.feature_dim = 4;
  config.feature_noise_sigma = 0.1;
  config.teacher_peakiness = 0.9;
  config.spike_jitter = 1;
  config.seed = 42;
  return config;
}

bool grids_equal(const PosteriorGrid& a, const PosteriorGrid& b) {
  if (a.frames() != b.frames()) return false;
  if (a.log_probs().cols() != b.log_probs().cols()) return false;
  for (size_t t = 0; t < a.frames(); ++t)
    for (size_t c = 0; c < a.log_probs().cols(); ++c)
      if (a.log_probs().at(t, c) != b.log_probs().at(t, c)) return false;
  return true;
}

// Independent little-endian writer, freezing the byte layout the reader
// must understand.
void put_u32_raw(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32_raw(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u32_raw(out, bits);
}

std::string posterior_file_bytes(uint32_t version, uint32_t rows, uint32_t cols,
                                 const std::vector<float>& values,
                                 const char* magic = "CTCP") {
  std::string bytes(magic, 4);
  put_u32_raw(bytes, version);
  put_u32_raw(bytes, rows);
  put_u32_raw(bytes, cols);
  for (float v : values) put_f32_raw(bytes, v);
  return bytes;
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TEST_SUITE_BEGIN("teacher");

TEST_CASE("word bank is lower case, unique, and encodable") {
  const auto bank = english_word_bank();
  REQUIRE(bank.size() >= 100);
  const Alphabet alphabet = Alphabet::default_english();
  std::set<std::string> seen;
  for (const std::string& word : bank) {
    CHECK(word.size() >= 4);  // every word qualifies for the dictionary gate
    CHECK_NOTHROW((void)alphabet.encode(word));
    CHECK(word.find(' ') == std::string::npos);
    seen.insert(word);
  }
  CHECK(seen.size() == bank.size());
}

TEST_CASE("generated corpus satisfies the frame rate and shape contract") {
  const GenConfig config = small_config();
  const std::vector<Utterance> corpus = generate_corpus(config);
  REQUIRE(corpus.size() == config.num_utterances);
  CHECK(corpus[5].id == "utt_000005");

  for (const Utterance& u : corpus) {
    REQUIRE(u.transcript_gt.has_value());
    REQUIRE(u.teacher_posteriors.has_value());
    const size_t frames_v = u.features.rows();
    CHECK(u.features.cols() == config.feature_dim);
    CHECK(u.features.all_finite());
    CHECK(u.teacher_posteriors->frames() == 2 * frames_v);

    const std::vector<int> labels = config.alphabet.encode(*u.transcript_gt);
    CHECK(labels.size() >= 1);
    CHECK(frames_v >= labels.size());  // at least one student frame each

    // Every teacher row is an exact distribution.
    const Matrix& logp = u.teacher_posteriors->log_probs();
    for (size_t t = 0; t < logp.rows(); ++t) {
      CHECK(std::abs(log_sum_exp(logp.row(t))) <= 1e-9);
    }
  }
}

TEST_CASE("peakiness one with no jitter produces one-hot rows and exact recovery") {
  GenConfig config = small_config();
  config.teacher_peakiness = 1.0;
  config.spike_jitter = 0;
  for (const Utterance& u : generate_corpus(config)) {
    const Matrix& logp = u.teacher_posteriors->log_probs();
    for (size_t t = 0; t < logp.rows(); ++t) {
      size_t zeros = 0, neg_inf = 0;
      for (double v : logp.row(t)) {
        if (v == 0.0) ++zeros;
        if (v == kNegInf) ++neg_inf;
      }
      CHECK(zeros == 1);
      CHECK(neg_inf == logp.cols() - 1);
    }
    CHECK(greedy_decode(*u.teacher_posteriors) == *u.transcript_gt);
  }
}

TEST_CASE("greedy decoding recovers the transcript at default peakiness") {
  GenConfig config = small_config();
  config.spike_jitter = 0;
  for (const Utterance& u : generate_corpus(config)) {
    CHECK(greedy_decode(*u.teacher_posteriors) == *u.transcript_gt);
  }
}

TEST_CASE("spike order survives jitter") {
  GenConfig config = small_config();
  config.teacher_peakiness = 1.0;
  config.spike_jitter = 3;
  config.num_utterances = 16;
  for (const Utterance& u : generate_corpus(config)) {
    CHECK(greedy_decode(*u.teacher_posteriors) == *u.transcript_gt);
  }
}

TEST_CASE("same seed gives a bit-identical corpus, different seed does not") {
  const GenConfig config = small_config();
  const std::vector<Utterance> first = generate_corpus(config);
  const std::vector<Utterance> second = generate_corpus(config);
  REQUIRE(first.size() == second.size());
  bool all_equal = true;
  for (size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].id == second[i].id);
    CHECK(*first[i].transcript_gt == *second[i].transcript_gt);
    REQUIRE(first[i].features.same_shape(second[i].features));
    for (size_t k = 0; k < first[i].features.size(); ++k) {
      if (first[i].features.data()[k] != second[i].features.data()[k]) all_equal = false;
    }
    CHECK(grids_equal(*first[i].teacher_posteriors, *second[i].teacher_posteriors));
  }
  CHECK(all_equal);

  GenConfig reseeded = config;
  reseeded.seed = 43;
  const std::vector<Utterance> third = generate_corpus(reseeded);
  bool any_diff = false;
  for (size_t i = 0; i < first.size(); ++i) {
    if (*first[i].transcript_gt != *third[i].transcript_gt) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("each utterance depends only on seed and index") {
  const GenConfig config = small_config();
  const std::vector<Utterance> corpus = generate_corpus(config);
  const Utterance solo = generate_utterance(config, 5);
  CHECK(solo.id == corpus[5].id);
  CHECK(*solo.transcript_gt == *corpus[5].transcript_gt);
  CHECK(grids_equal(*solo.teacher_posteriors, *corpus[5].teacher_posteriors));
  for (size_t k = 0; k < solo.features.size(); ++k) {
    CHECK(solo.features.data()[k] == corpus[5].features.data()[k]);
  }
}

TEST_CASE("generator rejects invalid configs") {
  GenConfig config = small_config();
  config.transcript_words = {3, 2};
  CHECK_THROWS_AS((void)generate_corpus(config), ConfigError);
  config = small_config();
  config.frames_per_grapheme = {0, 2};
  CHECK_THROWS_AS((void)generate_corpus(config), ConfigError);
  config = small_config();
  config.feature_dim = 0;
  CHECK_THROWS_AS((void)generate_corpus(config), ConfigError);
  config = small_config();
  config.feature_noise_sigma = -0.1;
  CHECK_THROWS_AS((void)generate_corpus(config), ConfigError);
  config = small_config();
  config.teacher_peakiness = 0.0;
  CHECK_THROWS_AS((void)generate_corpus(config), ConfigError);
  config = small_config();
  config.teacher_peakiness = 1.1;
  CHECK_THROWS_AS((void)generate_corpus(config), ConfigError);
  config = small_config();
  config.spike_jitter = -1;
  CHECK_THROWS_AS((void)generate_corpus(config), ConfigError);
  config = small_config();
  config.vocabulary = {"ok", ""};
  CHECK_THROWS_AS((void)generate_corpus(config), ConfigError);
  config = small_config();
  config.vocabulary = {"two words"};
  CHECK_THROWS_AS((void)generate_corpus(config), ConfigError);
  config = small_config();
  config.vocabulary = {"caf\xc3\xa9"};  // non-alphabet byte
  CHECK_THROWS_AS((void)generate_corpus(config), OutOfAlphabetError);
}

TEST_CASE("features are grapheme embeddings plus noise") {
  GenConfig config;
  config.alphabet = Alphabet("ab");
  config.vocabulary = {"ab"};
  config.num_utterances = 2;
  config.transcript_words = {1, 1};
  config.frames_per_grapheme = {1, 1};
  config.feature_dim = 6;
  config.feature_noise_sigma = 0.0;
  config.seed = 7;

  const std::vector<Utterance> corpus = generate_corpus(config);
  for (const Utterance& u : corpus) {
    REQUIRE(u.features.rows() == 2);  // one frame per grapheme
    bool rows_differ = false;
    for (size_t d = 0; d < config.feature_dim; ++d) {
      if (u.features.at(0, d) != u.features.at(1, d)) rows_differ = true;
    }
    CHECK(rows_differ);
  }
  // With no noise, the same grapheme embeds identically across utterances.
  for (size_t d = 0; d < config.feature_dim; ++d) {
    CHECK(corpus[0].features.at(0, d) == corpus[1].features.at(0, d));
    CHECK(corpus[0].features.at(1, d) == corpus[1].features.at(1, d));
  }

  GenConfig noisy = config;
  noisy.feature_noise_sigma = 0.5;
  const std::vector<Utterance> jittered = generate_corpus(noisy);
  bool noise_moved_something = false;
  for (size_t d = 0; d < config.feature_dim; ++d) {
    if (jittered[0].features.at(0, d) != corpus[0].features.at(0, d)) {
      noise_moved_something = true;
    }
  }
  CHECK(noise_moved_something);
}

TEST_CASE("true transcript dominates equal-length alternatives by brute force") {
  GenConfig config;
  config.alphabet = Alphabet("ab");
  config.vocabulary = {"ab"};
  config.num_utterances = 1;
  config.transcript_words = {1, 1};
  config.frames_per_grapheme = {1, 1};
  config.feature_dim = 2;
  config.teacher_peakiness = 0.9;
  config.spike_jitter = 0;
  config.seed = 3;

  const Utterance u = generate_utterance(config, 0);
  REQUIRE(*u.transcript_gt == "ab");
  const PosteriorGrid& grid = *u.teacher_posteriors;
  REQUIRE(grid.frames() == 4);

  const double truth = ctc_logprob_bruteforce(grid, config.alphabet.encode("ab"));
  for (const std::string other : {"aa", "ba", "bb"}) {
    CHECK(truth > ctc_logprob_bruteforce(grid, config.alphabet.encode(other)));
  }
}

TEST_CASE("teacher transcription delegates to the decoders") {
  GenConfig config = small_config();
  config.spike_jitter = 0;
  const Utterance u = generate_utterance(config, 2);
  CHECK(teacher_transcribe(*u.teacher_posteriors) ==
        greedy_decode(*u.teacher_posteriors));
  CHECK(teacher_transcribe(*u.teacher_posteriors) == *u.transcript_gt);

  // All-blank grid decodes to the empty transcript.
  const Alphabet ab("ab");
  Matrix blanks(3, 3, kNegInf);
  for (size_t t = 0; t < 3; ++t) blanks.at(t, 2) = 0.0;
  CHECK(teacher_transcribe(PosteriorGrid(ab, std::move(blanks))).empty());
}

TEST_CASE("wide-beam transcription matches exhaustive search on small grids") {
  const Alphabet ab("ab");
  std::mt19937_64 rng(0x7eac ^ 0x5eed);
  std::uniform_real_distribution<double> logit(-2.0, 2.0);
  BeamConfig wide;
  wide.width = 4096;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix logits(5, 3);
    for (double& v : logits.data()) v = logit(rng);
    const PosteriorGrid grid(ab, log_softmax_rows(logits));
    CHECK(teacher_transcribe(grid, wide) == exhaustive_decode(grid).transcript);
  }
}

TEST_CASE("perturbation preserves normalization and determinism") {
  const GenConfig config = small_config();
  const Utterance u = generate_utterance(config, 0);
  const PosteriorGrid& grid = *u.teacher_posteriors;

  CHECK(grids_equal(perturb_grid(grid, 0.0, 9), grid));

  const PosteriorGrid once = perturb_grid(grid, 0.5, 9);
  const PosteriorGrid again = perturb_grid(grid, 0.5, 9);
  CHECK(grids_equal(once, again));
  CHECK_FALSE(grids_equal(once, grid));
  CHECK_FALSE(grids_equal(once, perturb_grid(grid, 0.5, 10)));
  for (size_t t = 0; t < once.frames(); ++t) {
    CHECK(std::abs(log_sum_exp(once.log_probs().row(t))) <= 1e-9);
  }

  // Zero-probability entries stay zero: a one-hot grid is a fixed point.
  GenConfig hot = config;
  hot.teacher_peakiness = 1.0;
  const Utterance one_hot = generate_utterance(hot, 0);
  CHECK(grids_equal(perturb_grid(*one_hot.teacher_posteriors, 2.0, 4),
                    *one_hot.teacher_posteriors));

  CHECK_THROWS_AS((void)perturb_grid(grid, -1.0, 0), ConfigError);
}

TEST_CASE("posterior files round trip within float precision") {
  const GenConfig config = small_config();
  const Utterance u = generate_utterance(config, 1);
  const PosteriorGrid& grid = *u.teacher_posteriors;

  testing::TempDir dir;
  const std::string path = dir.file("utt.ctcp");
  write_posteriors(grid, path);
  const PosteriorGrid loaded = read_posteriors(path, config.alphabet);
  REQUIRE(loaded.frames() == grid.frames());
  for (size_t t = 0; t < grid.frames(); ++t) {
    for (size_t c = 0; c < grid.log_probs().cols(); ++c) {
      const double a = grid.log_probs().at(t, c);
      const double b = loaded.log_probs().at(t, c);
      CHECK(std::abs(a - b) <= 1e-6);
    }
  }
}

TEST_CASE("posterior file layout is frozen") {
  const Alphabet ab("ab");
  Matrix logp = Matrix::from_rows({{std::log(0.5), std::log(0.25), std::log(0.25)}});
  const PosteriorGrid grid(ab, std::move(logp));

  testing::TempDir dir;
  const std::string path = dir.file("layout.ctcp");
  write_posteriors(grid, path);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const std::string expected = posterior_file_bytes(
      1, 1, 3,
      {static_cast<float>(std::log(0.5)), static_cast<float>(std::log(0.25)),
       static_cast<float>(std::log(0.25))});
  CHECK(bytes == expected);
}

TEST_CASE("posterior reader rejects malformed files") {
  const Alphabet ab("ab");
  const float third = static_cast<float>(std::log(1.0 / 3.0));
  testing::TempDir dir;
  const std::string path = dir.file("bad.ctcp");

  CHECK_THROWS_AS((void)read_posteriors(dir.file("missing.ctcp"), ab), FileError);

  write_bytes(path, posterior_file_bytes(1, 1, 3, {third, third, third}, "CTCQ"));
  CHECK_THROWS_AS((void)read_posteriors(path, ab), FormatError);

  write_bytes(path, posterior_file_bytes(2, 1, 3, {third, third, third}));
  CHECK_THROWS_AS((void)read_posteriors(path, ab), FormatError);

  const std::string good = posterior_file_bytes(1, 1, 3, {third, third, third});
  write_bytes(path, good.substr(0, good.size() - 5));  // truncated payload
  CHECK_THROWS_AS((void)read_posteriors(path, ab), FormatError);

  write_bytes(path, good.substr(0, 10));  // truncated header
  CHECK_THROWS_AS((void)read_posteriors(path, ab), FormatError);

  write_bytes(path, good + "x");  // trailing byte
  CHECK_THROWS_AS((void)read_posteriors(path, ab), FormatError);

  write_bytes(path, posterior_file_bytes(1, 0, 3, {}));
  CHECK_THROWS_AS((void)read_posteriors(path, ab), FormatError);

  // Shape disagrees with the alphabet (2 classes vs expected 3).
  const float half = static_cast<float>(std::log(0.5));
  write_bytes(path, posterior_file_bytes(1, 1, 2, {half, half}));
  CHECK_THROWS_AS((void)read_posteriors(path, ab), FormatError);

  // A row whose mass sums to 0.5 is rejected as non-normalized.
  const float sixth = static_cast<float>(std::log(1.0 / 6.0));
  write_bytes(path, posterior_file_bytes(1, 1, 3, {sixth, sixth, sixth}));
  CHECK_THROWS_AS((void)read_posteriors(path, ab), FormatError);

  // Small drift (~5e-5) is renormalized instead of rejected.
  const float drifted = static_cast<float>(std::log(1.0 / 3.0) + 5e-5 / 3.0);
  write_bytes(path, posterior_file_bytes(1, 1, 3, {drifted, drifted, drifted}));
  const PosteriorGrid renormalized = read_posteriors(path, ab);
  CHECK(std::abs(log_sum_exp(renormalized.log_probs().row(0))) <= 1e-12);
}

TEST_CASE("feature files round trip and reject corruption") {
  Matrix features = Matrix::from_rows({{1.0, -2.5}, {0.125, 3.0}, {0.0, -0.75}});
  testing::TempDir dir;
  const std::string path = dir.file("utt.ctcf");
  write_features(features, path);
  const Matrix loaded = read_features(path);
  REQUIRE(loaded.same_shape(features));
  // These values are exactly representable in float32.
  for (size_t k = 0; k < features.size(); ++k) {
    CHECK(loaded.data()[k] == features.data()[k]);
  }

  Matrix bad = features;
  bad.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(write_features(bad, dir.file("nan.ctcf")), FormatError);

  write_bytes(path, posterior_file_bytes(1, 1, 2, {1.0f, 2.0f}, "CTCX"));
  CHECK_THROWS_AS((void)read_features(path), FormatError);

  const float inf = std::numeric_limits<float>::infinity();
  write_bytes(path, posterior_file_bytes(1, 1, 2, {1.0f, inf}, "CTCF"));
  CHECK_THROWS_AS((void)read_features(path), FormatError);
}

TEST_SUITE_END();

}  // namespace
}  // namespace xmodal
