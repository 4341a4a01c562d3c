// xmodal/teacher/teacher.cc

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

#include "xmodal/teacher/teacher.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <random>
#include <sstream>

#include "xmodal/core/binary_io.h"
#include "xmodal/core/errors.h"
#include "xmodal/core/log_math.h"
#include "xmodal/core/rng.h"

namespace xmodal {

namespace {

const std::vector<std::string> kWordBank = {
    "about",    "above",    "after",    "again",   "almost",   "along",
    "always",   "animal",   "another",  "answer",  "around",   "because",
    "before",   "began",    "begin",    "being",   "below",    "between",
    "bright",   "bring",    "called",   "camera",  "change",   "children",
    "close",    "cloud",    "color",    "could",   "country",  "course",
    "danger",   "doesn't",  "during",   "early",   "earth",    "enough",
    "every",    "example",  "family",   "father",  "field",    "follow",
    "found",    "friend",   "garden",   "great",   "group",    "happy",
    "heard",    "house",    "hundred",  "idea",    "island",   "it's",
    "large",    "later",    "learn",    "letter",  "light",    "listen",
    "little",   "living",   "machine",  "might",   "million",  "minute",
    "morning",  "mother",   "mountain", "moved",   "music",    "never",
    "night",    "number",   "ocean",    "often",   "order",    "other",
    "paper",    "people",   "picture",  "place",   "plant",    "point",
    "quickly",  "quiet",    "reason",   "remember", "river",   "school",
    "second",   "sentence", "should",   "simple",  "small",    "someone",
    "something", "sound",   "spell",    "start",   "still",    "story",
    "street",   "strong",   "study",    "sudden",  "summer",   "table",
    "their",    "there",    "these",    "thing",   "think",    "thought",
    "three",    "through",  "today",    "together", "toward",  "travel",
    "under",    "until",    "usually",  "voice",   "water",    "weather",
    "where",    "which",    "while",    "white",   "whole",    "window",
    "winter",   "without",  "world",    "would",   "write",    "young",
};

// Embeddings depend only on (grapheme, dimension), never on the corpus
// seed, so checkpoints transfer between corpora that share an alphabet.
constexpr uint64_t kEmbeddingStream = 0x7ea2c0de5eed0001ULL;

double grapheme_embedding(int grapheme, size_t dim) {
  const uint64_t h = mix_seed(kEmbeddingStream + static_cast<uint64_t>(grapheme),
                              static_cast<uint64_t>(dim));
  const double unit = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
  return 2.0 * unit - 1.0;
}

void validate_range(const IntRange& range, const char* what) {
  if (range.lo < 1 || range.hi < range.lo) {
    throw ConfigError(std::string(what) + " range [" + std::to_string(range.lo) +
                      ", " + std::to_string(range.hi) + "] is empty or below 1");
  }
}

const std::vector<std::string>& effective_vocabulary(const GenConfig& config) {
  return config.vocabulary.empty() ? kWordBank : config.vocabulary;
}

void validate_config(const GenConfig& config) {
  validate_range(config.transcript_words, "transcript_words");
  validate_range(config.frames_per_grapheme, "frames_per_grapheme");
  if (config.feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (config.feature_noise_sigma < 0.0) {
    throw ConfigError("feature_noise_sigma must be non-negative");
  }
  if (!(config.teacher_peakiness > 0.0) || config.teacher_peakiness > 1.0) {
    throw ConfigError("teacher_peakiness must lie in (0, 1]");
  }
  if (config.spike_jitter < 0) throw ConfigError("spike_jitter must be non-negative");
  for (const std::string& word : effective_vocabulary(config)) {
    if (word.empty()) throw ConfigError("vocabulary words must be nonempty");
    if (word.find(' ') != std::string::npos) {
      throw ConfigError("vocabulary word contains a space: '" + word + "'");
    }
    (void)config.alphabet.encode(word);  // OutOfAlphabetError on bad graphemes
  }
}

constexpr uint32_t kFormatVersion = 1;

std::string serialize_matrix(const char* magic, const Matrix& m) {
  std::string out;
  out.reserve(16 + 4 * m.size());
  out.append(magic, 4);
  binary::put_u32(out, kFormatVersion);
  binary::put_u32(out, static_cast<uint32_t>(m.rows()));
  binary::put_u32(out, static_cast<uint32_t>(m.cols()));
  for (double v : m.data()) binary::put_f32(out, static_cast<float>(v));
  return out;
}

Matrix parse_matrix(const char* magic, const std::string& path) {
  const std::string buf = binary::read_file(path);
  binary::Reader reader(buf, path);
  reader.expect_magic(magic);
  const uint32_t version = reader.u32();
  if (version != kFormatVersion) {
    throw FormatError(path + ": unsupported version " + std::to_string(version));
  }
  const uint32_t rows = reader.u32();
  const uint32_t cols = reader.u32();
  if (rows == 0 || cols == 0) throw FormatError(path + ": empty shape");

  Matrix m(rows, cols);
  for (double& v : m.data()) v = static_cast<double>(reader.f32());
  reader.expect_end();
  return m;
}

}  // namespace

std::span<const std::string> english_word_bank() { return kWordBank; }

Utterance generate_utterance(const GenConfig& config, size_t index) {
  validate_config(config);
  const std::vector<std::string>& vocabulary = effective_vocabulary(config);
  const int num_classes = config.alphabet.num_classes();
  std::mt19937_64 rng(mix_seed(config.seed, index));

  // Draw order is fixed: word count, words, durations, jitters, noise.
  std::uniform_int_distribution<int> words_dist(config.transcript_words.lo,
                                                config.transcript_words.hi);
  std::uniform_int_distribution<size_t> word_dist(0, vocabulary.size() - 1);
  const int num_words = words_dist(rng);
  std::string transcript;
  for (int w = 0; w < num_words; ++w) {
    if (w > 0) transcript.push_back(' ');
    transcript += vocabulary[word_dist(rng)];
  }
  const std::vector<int> labels = config.alphabet.encode(transcript);
  const size_t L = labels.size();

  std::uniform_int_distribution<int> duration_dist(config.frames_per_grapheme.lo,
                                                   config.frames_per_grapheme.hi);
  std::vector<int> durations(L);
  size_t frames_v = 0;
  for (int& d : durations) {
    d = duration_dist(rng);
    frames_v += static_cast<size_t>(d);
  }
  const size_t frames_a = 2 * frames_v;

  // Emission spikes: nominally at the centre of each grapheme's teacher
  // span, jittered, then clamped to stay strictly increasing with at least
  // one non-spike frame between neighbours so repeated graphemes survive
  // the collapse. frames_a >= 2L makes that always feasible.
  std::uniform_int_distribution<int> jitter_dist(-config.spike_jitter,
                                                 config.spike_jitter);
  std::vector<size_t> spikes(L);
  long prev = -2;
  size_t start = 0;
  for (size_t i = 0; i < L; ++i) {
    const long nominal = 2 * static_cast<long>(start) + durations[i];
    start += static_cast<size_t>(durations[i]);
    const long lo = prev + 2;
    const long hi = static_cast<long>(frames_a) - 1 -
                    2 * (static_cast<long>(L) - 1 - static_cast<long>(i));
    const long pos = std::clamp(nominal + jitter_dist(rng), lo, hi);
    spikes[i] = static_cast<size_t>(pos);
    prev = pos;
  }

  Matrix features(frames_v, config.feature_dim);
  std::normal_distribution<double> noise(0.0, config.feature_noise_sigma > 0.0
                                                  ? config.feature_noise_sigma
                                                  : 1.0);
  size_t frame = 0;
  for (size_t i = 0; i < L; ++i) {
    for (int k = 0; k < durations[i]; ++k, ++frame) {
      for (size_t d = 0; d < config.feature_dim; ++d) {
        double value = grapheme_embedding(labels[i], d);
        if (config.feature_noise_sigma > 0.0) value += noise(rng);
        features.at(frame, d) = value;
      }
    }
  }

  // Teacher grid: blank-dominated background rows, one peaked spike row per
  // grapheme. All rows are exact distributions by construction.
  const double peak = config.teacher_peakiness;
  const double rest = 1.0 - peak;
  const double base_blank = std::log(peak);
  const double base_other = std::log(rest / (num_classes - 1));
  Matrix logp(frames_a, static_cast<size_t>(num_classes), base_other);
  const int blank = config.alphabet.blank_id();
  for (size_t t = 0; t < frames_a; ++t) logp.at(t, static_cast<size_t>(blank)) = base_blank;
  for (size_t i = 0; i < L; ++i) {
    std::span<double> row = logp.row(spikes[i]);
    const int g = labels[i];
    if (num_classes == 2) {
      row[static_cast<size_t>(g)] = std::log(peak);
      row[static_cast<size_t>(blank)] = std::log(rest);
    } else {
      const double spike_other = std::log(0.2 * rest / (num_classes - 2));
      for (double& v : row) v = spike_other;
      row[static_cast<size_t>(g)] = std::log(peak);
      row[static_cast<size_t>(blank)] = std::log(0.8 * rest);
    }
  }

  Utterance utterance;
  std::ostringstream id;
  id << "utt_" << std::setw(6) << std::setfill('0') << index;
  utterance.id = id.str();
  utterance.features = std::move(features);
  utterance.teacher_posteriors =
      PosteriorGrid(config.alphabet, std::move(logp));
  utterance.transcript_gt = transcript;
  return utterance;
}

std::vector<Utterance> generate_corpus(const GenConfig& config) {
  validate_config(config);
  std::vector<Utterance> corpus;
  corpus.reserve(config.num_utterances);
  for (size_t i = 0; i < config.num_utterances; ++i) {
    corpus.push_back(generate_utterance(config, i));
  }
  return corpus;
}

std::string teacher_transcribe(const PosteriorGrid& grid) {
  return greedy_decode(grid);
}

std::string teacher_transcribe(const PosteriorGrid& grid, const BeamConfig& config,
                               const NGramLM* lm) {
  return beam_search(grid, config, lm).transcript;
}

PosteriorGrid perturb_grid(const PosteriorGrid& grid, double sigma, uint64_t seed) {
  if (sigma < 0.0) throw ConfigError("perturbation sigma must be non-negative");
  if (sigma == 0.0) return grid;
  Matrix logp = grid.log_probs();
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : logp.data()) {
    if (std::isfinite(v)) v += noise(rng);
  }
  for (size_t t = 0; t < logp.rows(); ++t) log_softmax(logp.row(t), logp.row(t));
  return PosteriorGrid(grid.alphabet(), std::move(logp));
}

void write_posteriors(const PosteriorGrid& grid, const std::string& path) {
  binary::write_file(path, serialize_matrix("CTCP", grid.log_probs()));
}

PosteriorGrid read_posteriors(const std::string& path, const Alphabet& alphabet) {
  Matrix logp = parse_matrix("CTCP", path);
  if (logp.cols() != static_cast<size_t>(alphabet.num_classes())) {
    throw FormatError(path + ": grid has " + std::to_string(logp.cols()) +
                      " classes, alphabet expects " +
                      std::to_string(alphabet.num_classes()));
  }
  // Float32 quantization moves row sums slightly off 1; renormalize.
  return PosteriorGrid::with_renormalization(alphabet, std::move(logp), 1e-4);
}

void write_features(const Matrix& features, const std::string& path) {
  if (!features.all_finite()) {
    throw FormatError("features must be finite to serialize: " + path);
  }
  binary::write_file(path, serialize_matrix("CTCF", features));
}

Matrix read_features(const std::string& path) {
  Matrix features = parse_matrix("CTCF", path);
  if (!features.all_finite()) throw FormatError(path + ": non-finite features");
  return features;
}

}  // namespace xmodal
