// xmodal/decode/decode.h

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

#include <string>

#include "xmodal/core/log_math.h"
#include "xmodal/core/posterior_grid.h"
#include "xmodal/decode/ngram_lm.h"
#include "xmodal/defaults.h"

namespace xmodal {

// Per-frame argmax (ties toward the lowest symbol id), then collapse.
std::string greedy_decode(const PosteriorGrid& grid);

struct BeamConfig {
  size_t width = kDefaultBeamWidth;
  double lm_weight = kDefaultLmWeight;   // alpha, applied per completed word
  double word_bonus = kDefaultWordBonus; // beta, applied per completed word
  double prune_logp = kNegInf;           // skip symbols below this per-frame floor
};

struct DecodeResult {
  std::string transcript;
  double score = 0.0;  // log p(transcript | grid) plus any LM terms
};

// CTC prefix beam search over (blank, non-blank) prefix probabilities.
// With an LM, completing a word (emitting the space grapheme, or the final
// partial word at end of input) adds lm_weight * lm_logp + word_bonus.
// Without an LM and a width exceeding the number of distinct prefixes the
// returned score is exactly log p(transcript | grid). Pruning ties break
// toward the lexicographically smaller prefix.
DecodeResult beam_search(const PosteriorGrid& grid, const BeamConfig& config,
                         const NGramLM* lm = nullptr);

// Scores every output of length <= T via the brute-force path sum and
// returns the maximizer (lexicographically smallest on ties). Oracle only:
// throws InstanceTooLarge beyond T=6 or |C|=3.
DecodeResult exhaustive_decode(const PosteriorGrid& grid);

}  // namespace xmodal
