// xmodal/teacher/teacher.h

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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmodal/core/alphabet.h"
#include "xmodal/core/matrix.h"
#include "xmodal/core/posterior_grid.h"
#include "xmodal/decode/decode.h"
#include "xmodal/defaults.h"

namespace xmodal {

// One paired two-modality sample: student-rate features (the visual role)
// and, when present, the teacher's posterior grid at twice the frame rate
// plus its transcriptions.
struct Utterance {
  std::string id;
  Matrix features;  // T_v x D, student input
  std::optional<PosteriorGrid> teacher_posteriors;  // 2*T_v frames when present
  std::optional<std::string> transcript_gt;
  std::optional<std::string> transcript_asr;
};

// Closed [lo, hi] integer range; empty (hi < lo) ranges are invalid.
struct IntRange {
  int lo = 1;
  int hi = 1;
};

// Knobs of the synthetic teacher. `teacher_peakiness` is the probability
// mass the teacher puts on the correct symbol at an emission frame (and on
// blank elsewhere); `spike_jitter` shifts each emission spike by up to that
// many teacher frames in either direction, modelling teacher/student
// timing misalignment.
struct GenConfig {
  Alphabet alphabet = Alphabet::default_english();
  size_t num_utterances = 0;
  IntRange transcript_words{3, 8};     // transcript length, in words
  IntRange frames_per_grapheme{1, 3};  // duration, in student frames
  size_t feature_dim = 16;
  double feature_noise_sigma = 0.1;
  double teacher_peakiness = kDefaultTeacherPeakiness;  // in (0, 1]
  int spike_jitter = kDefaultSpikeJitter;
  uint64_t seed = 0;
  std::vector<std::string> vocabulary;  // empty: use english_word_bank()
};

// Bundled lower-case word list the generator draws transcripts from; also
// serves as the dictionary for the corpus filter.
std::span<const std::string> english_word_bank();

// Deterministic synthetic corpus: every utterance carries features, a
// teacher grid with 2*T_v frames, and its ground-truth transcript.
std::vector<Utterance> generate_corpus(const GenConfig& config);

// The corpus entry at `index`; depends only on (config, index), so
// generate_corpus(config)[i] == generate_utterance(config, i).
Utterance generate_utterance(const GenConfig& config, size_t index);

// Decodes a teacher grid into a transcript: best path (greedy), or prefix
// beam search when a BeamConfig is given.
std::string teacher_transcribe(const PosteriorGrid& grid);
std::string teacher_transcribe(const PosteriorGrid& grid, const BeamConfig& config,
                               const NGramLM* lm = nullptr);

// Adds Gaussian noise (stddev `sigma`) to every finite log-probability and
// renormalizes each row; stands in for a second, noisier transcription
// model in the agreement gate. Zero probabilities stay zero.
PosteriorGrid perturb_grid(const PosteriorGrid& grid, double sigma, uint64_t seed);

// Posterior interchange format, one grid per file: magic "CTCP", u32
// version (1), u32 frames, u32 classes, then frames*classes little-endian
// float32 log-probabilities in row-major order. Rows whose probability
// mass drifts from 1 by more than 1e-4 are rejected; smaller drift (e.g.
// float32 rounding) is renormalized away on read.
void write_posteriors(const PosteriorGrid& grid, const std::string& path);
PosteriorGrid read_posteriors(const std::string& path, const Alphabet& alphabet);

// Feature interchange format: magic "CTCF", u32 version (1), u32 frames,
// u32 dim, then frames*dim little-endian float32 values, row-major.
void write_features(const Matrix& features, const std::string& path);
Matrix read_features(const std::string& path);

}  // namespace xmodal
