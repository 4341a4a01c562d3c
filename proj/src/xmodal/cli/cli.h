// xmodal/cli/cli.h

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
#include <cstdint>
#include <string>
#include <vector>

#include "xmodal/core/alphabet.h"
#include "xmodal/defaults.h"
#include "xmodal/teacher/teacher.h"

namespace xmodal {

// Run settings as an INI file ([section] / key = value) merged with flag
// overrides. Sections: data, model, loss, optim, decode, filter. Unknown
// sections or keys raise ConfigError; the fully resolved set is echoed into
// the run's output directory so a run can be replayed from its artifacts.
struct RunConfig {
  // [data]  synthetic corpus generation
  std::string alphabet = "english";  // "english" or literal graphemes, "\s" = space
  size_t num_utterances = 200;
  int words_min = 3;
  int words_max = 8;
  int frames_min = 1;
  int frames_max = 3;
  size_t feature_dim = 16;
  double noise_sigma = 0.1;
  double peakiness = kDefaultTeacherPeakiness;
  int jitter = kDefaultSpikeJitter;
  double asr2_noise_sigma = 0.3;  // perturbation behind the second transcription
  double dev_fraction = 0.1;
  uint64_t data_seed = 0;
  std::string vocabulary;  // word-list path; empty = bundled bank

  // [model]
  std::string preset = "desk";  // "desk" or "paper"

  // [loss]
  double lambda_ctc = kDefaultLambdaCtc;
  double lambda_kd = kDefaultLambdaKd;

  // [optim]
  double lr = kDefaultLearningRate;
  uint64_t warmup_steps = kDefaultWarmupSteps;
  double decay_power = kDefaultDecayPower;
  double weight_decay = 0.0;
  double clip_norm = kDefaultClipNorm;
  size_t batch_size = kDefaultBatchSize;
  int epochs = 1;
  int finetune_epochs = 0;
  double finetune_fraction = kDefaultFinetuneFraction;
  uint64_t eval_cadence = kDefaultEvalCadence;
  uint64_t seed = 0;

  // [decode]
  std::string mode = "greedy";  // "greedy" or "beam"
  size_t beam_width = kDefaultBeamWidth;
  double lm_weight = kDefaultLmWeight;
  double word_bonus = kDefaultWordBonus;
  std::string lm;  // LM path; empty = no shallow fusion

  // [filter]
  double min_valid_ratio = kDefaultMinValidRatio;
  double max_wer = kDefaultMaxAgreementWer;
};

// Applies `path` on top of the defaults. ConfigError on unknown keys,
// malformed lines, or unparseable values; FileError when unreadable.
RunConfig parse_run_config(const std::string& path);

// Canonical text for the resolved configuration; parse_run_config of the
// written text reproduces `config` exactly.
std::string render_run_config(const RunConfig& config);

// The alphabet a config names: "english" or its literal graphemes with
// "\s" unescaped to a space.
Alphabet alphabet_from(const std::string& spec);

// Materializes manifest records: relative feature/posterior paths resolve
// against the manifest's directory, empty fields stay unset.
std::vector<Utterance> load_utterances(const std::string& manifest_path,
                                       const Alphabet& alphabet);

// Entry point behind main(). Exit codes: 0 success, 1 validation or usage
// error, 2 runtime failure (missing or corrupt files).
int run_cli(int argc, const char* const* argv);

}  // namespace xmodal
